//! The `tdrguard` command line.

use crate::detector::{
    benchmark_methods, calibrate, causal_smooth, detect_stream, locate_change, BenchConfig, CalibrationConfig,
    ThresholdPolicy, REPORT_CSV_HEADER, STREAM_CSV_HEADER,
};
use crate::io::{self, Header, IoError};
use crate::sim::{average, noisy_series_from, simulate_tdr, PulseSpec, SimConfig};
use crate::topology::{parallel_resistance, parse_topology, total_bus_resistance, NodeLoad, Topology, TRANSCEIVER_RESISTANCE};
use crate::units::{format_float, parse_si};
use crate::Error;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tdrguard", version, about = "Detect and locate alien devices on a CAN bus by TDR")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Bus description file
    #[arg(long, value_name = "PATH")]
    pub topology: Option<PathBuf>,
    /// Main output file
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override a setting, e.g. `n_average=30` or `dz=5mm` (repeatable)
    #[arg(long = "config", value_name = "KEY=VALUE")]
    pub config: Vec<String>,
}

fn si(s: &str) -> Result<f64, String> {
    parse_si(s).map_err(|e| e.to_string())
}

fn policy(s: &str) -> Result<ThresholdPolicy, String> {
    s.parse().map_err(|e: crate::DetectError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate TDR captures of a bus and write them as CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = si)]
        pulse_width: Option<f64>,
        #[arg(long, value_parser = si)]
        amplitude: Option<f64>,
        #[arg(long, value_parser = si)]
        rise_time: Option<f64>,
        /// Number of captures
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Per-capture noise standard deviation, volts
        #[arg(long, value_parser = si, default_value = "0")]
        noise: f64,
        /// Attach a transceiver at this bus position, metres
        #[arg(long, value_parser = si)]
        attach: Option<f64>,
        /// Stub length of the attached transceiver
        #[arg(long, value_parser = si, default_value = "0.1")]
        attach_stub: f64,
        /// Captures taken before the transceiver is attached
        #[arg(long, default_value_t = 0)]
        attach_after: usize,
        /// Unplug the labelled device before simulating (repeatable)
        #[arg(long, value_name = "LABEL")]
        detach: Vec<String>,
    },
    /// Build a reference model from a capture series
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        series: PathBuf,
        /// `fixed:<value>` or `baseline_max_plus:<margin>`
        #[arg(long, value_parser = policy)]
        threshold: Option<ThresholdPolicy>,
    },
    /// Score consecutive batches of a series against a reference model
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        series: PathBuf,
        /// K per batch: batch_index,k_score,threshold,alien
        #[arg(long, value_name = "PATH")]
        plot: Option<PathBuf>,
        /// One report row per batch
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Estimate the distance to a change from the newest batch of a series
    Locate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "PATH")]
        series: PathBuf,
    },
    /// Compare the four methods on simulated ECU removals
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ECU labels; all stubs when omitted
        #[arg(long)]
        labels: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_parser = si, default_value = "0")]
        noise: f64,
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Total DC bus resistance and the drop caused by one more transceiver
    Resistance {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

/// Unreadable or malformed input files are usage errors; everything else
/// is a runtime failure.
impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        match e.into() {
            Error::Io(e @ (IoError::File { .. } | IoError::Csv(_) | IoError::Format(_))) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Settings reachable through `--config`.
#[derive(Debug, Clone, Default)]
struct Overrides {
    calibration: CalibrationConfig,
    spatial_step: Option<f64>,
    cfl: Option<f64>,
    duration: Option<f64>,
    velocity_set: bool,
    entries: Vec<(String, String)>,
}

fn parse_overrides(pairs: &[String]) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for pair in pairs {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--config expects KEY=VALUE, got '{pair}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = || si(value).map_err(|e| CliError::Usage(format!("--config {key}: {e}")));
        let count = || {
            let v = num()?;
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Usage(format!("--config {key}: expected a whole number, got '{value}'")))
            }
        };
        let c = &mut o.calibration;
        match key {
            "n_reference" => c.n_reference = count()?,
            "n_average" => c.n_average = count()?,
            "window_length" => c.window_length = count()?,
            "segment_length" => c.coherence.welch.segment_len = count()?,
            "overlap" => c.coherence.welch.overlap = num()?,
            "peak_threshold" => c.coherence.peak_threshold = num()?,
            "noise_gate" => c.coherence.noise_gate = num()?,
            "sobolev_order" => c.sobolev_order = num()?,
            "velocity" => {
                c.velocity = num()?;
                o.velocity_set = true;
            }
            "k_sigma" => c.k_sigma = num()?,
            "hold" => c.hold = count()?,
            "smoothing" => c.smoothing = count()?,
            "threshold" => c.threshold_policy = policy(value).map_err(CliError::Usage)?,
            "guard.level_sigma" => c.guard.level_sigma = num()?,
            "guard.min_level_gate" => c.guard.min_level_gate = num()?,
            "guard.bit_time" => c.guard.bit_time = num()?,
            "guard.dominant_level" => c.guard.dominant_level = num()?,
            "guard.edge_run" => c.guard.edge_run = count()?,
            "dz" => o.spatial_step = Some(num()?),
            "cfl" => o.cfl = Some(num()?),
            "duration" => o.duration = Some(num()?),
            _ => return Err(CliError::Usage(format!("unknown --config key '{key}'"))),
        }
        o.entries.push((key.to_string(), value.to_string()));
    }
    Ok(o)
}

struct Context {
    command: &'static str,
    common: Common,
    overrides: Overrides,
    topology: Option<(Topology, String)>,
}

impl Context {
    fn new(command: &'static str, common: Common) -> Result<Self, CliError> {
        let overrides = parse_overrides(&common.config)?;
        let topology = match &common.topology {
            Some(path) => {
                let text = io::read_text(path)?;
                let topo = parse_topology(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
                Some((topo, hash))
            }
            None => None,
        };
        Ok(Self {
            command,
            common,
            overrides,
            topology,
        })
    }

    fn topology(&self) -> Result<&Topology, CliError> {
        self.topology
            .as_ref()
            .map(|(t, _)| t)
            .ok_or_else(|| CliError::Usage(format!("{} needs --topology", self.command)))
    }

    /// Detector settings, with the velocity taken from the topology unless
    /// overridden.
    fn calibration(&self) -> CalibrationConfig {
        let mut c = self.overrides.calibration.clone();
        if let (false, Some((t, _))) = (self.overrides.velocity_set, &self.topology) {
            c.velocity = t.propagation_velocity();
        }
        c
    }

    fn header(&self) -> Header {
        let mut h = Header::new();
        h.push("command", self.command).push("seed", self.common.seed);
        if let (Some(path), Some((_, hash))) = (&self.common.topology, &self.topology) {
            h.push("topology", path.display()).push("topology_sha256", hash);
        }
        for (k, v) in &self.overrides.entries {
            h.push(format!("config.{k}"), v);
        }
        h
    }

    fn out(&self) -> Result<&Path, CliError> {
        self.common
            .out
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{} needs --out", self.command)))
    }
}

fn comment_block(h: &Header) -> String {
    h.entries.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(io::write_text(path, text)?)
}

fn cmd_simulate(ctx: &Context, args: SimulateArgs) -> Result<String, CliError> {
    let mut topo = ctx.topology()?.clone();
    for label in &args.detach {
        topo = topo.detach_device(label)?;
    }
    let mut pulse = PulseSpec::for_topology(&topo);
    if let Some(w) = args.pulse_width {
        pulse.width = w;
        pulse.rise_time = pulse.rise_time.min(w);
    }
    if let Some(a) = args.amplitude {
        pulse.amplitude = a;
    }
    if let Some(r) = args.rise_time {
        pulse.rise_time = r;
    }
    let o = &ctx.overrides;
    let mut sim = SimConfig::with_spatial_step(&topo, &pulse, o.spatial_step.unwrap_or(crate::sim::DEFAULT_SPATIAL_STEP));
    if let Some(cfl) = o.cfl {
        sim.cfl_factor = cfl;
        sim.time_step = sim.stability_limit(&topo);
    }
    if let Some(d) = o.duration {
        sim.duration = d;
    }
    sim.noise_sigma = args.noise;
    sim.rng_seed = ctx.common.seed;
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let out = ctx.out()?;
    let before = simulate_tdr(&topo, &pulse, &sim)?;
    let split = match args.attach {
        Some(_) => args.attach_after.min(args.n),
        None => args.n,
    };
    let mut series = noisy_series_from(&before, args.noise, ctx.common.seed, 0..split)?;
    if let Some(pos) = args.attach {
        let attacked = topo.attach_device(pos, args.attach_stub, NodeLoad::transceiver(), "alien")?;
        let after = simulate_tdr(&attacked, &pulse, &sim)?;
        series = series.concat(&noisy_series_from(&after, args.noise, ctx.common.seed, split..args.n)?)?;
    }
    let mut header = ctx.header();
    header
        .push("n", args.n)
        .push_float("noise_sigma", args.noise)
        .push_float("pulse_width", pulse.width)
        .push_float("pulse_amplitude", pulse.amplitude)
        .push_float("rise_time", pulse.rise_time)
        .push_float("spatial_step", sim.spatial_step);
    if let Some(pos) = args.attach {
        header
            .push_float("attach_position", pos)
            .push_float("attach_stub", args.attach_stub)
            .push("attach_after", split);
    }
    for label in &args.detach {
        header.push("detach", label);
    }
    let text = if args.n == 1 {
        io::render_waveform(&series.captures()[0], &header)?
    } else {
        io::render_series(&series, &header)?
    };
    write(out, &text)?;
    let mut summary: String = header.entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    let _ = writeln!(summary, "samples: {}", before.len());
    let _ = writeln!(summary, "dt: {}", format_float(before.dt()));
    let _ = writeln!(summary, "t0: {}", format_float(before.t0()));
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".summary.txt");
    write(Path::new(&sidecar), &summary)?;
    Ok(format!(
        "wrote {} capture(s) of {} samples to {}\n",
        args.n,
        before.len(),
        out.display()
    ))
}

struct SimulateArgs {
    pulse_width: Option<f64>,
    amplitude: Option<f64>,
    rise_time: Option<f64>,
    n: usize,
    noise: f64,
    attach: Option<f64>,
    attach_stub: f64,
    attach_after: usize,
    detach: Vec<String>,
}

fn cmd_calibrate(ctx: &Context, series: &Path, threshold: Option<ThresholdPolicy>) -> Result<String, CliError> {
    let out = ctx.out()?;
    let (series, _) = io::read_series(series)?;
    let mut config = ctx.calibration();
    if let Some(p) = threshold {
        config.threshold_policy = p;
    }
    let model = calibrate(&series, &config)?;
    let mut header = ctx.header();
    header.push("n_average", config.n_average);
    write(out, &io::render_model(&model, &header)?)?;
    Ok(format!(
        "threshold: {}\nnoise_sigma: {}\nbaseline_batches: {}\nmodel: {}\n",
        format_float(model.threshold),
        format_float(model.noise_sigma_estimate),
        model.baseline_scores.len(),
        out.display()
    ))
}

fn cmd_detect(ctx: &Context, model: &Path, series: &Path, plot: Option<&Path>, csv: Option<&Path>) -> Result<String, CliError> {
    let (model, _) = io::read_model(model)?;
    let (series, _) = io::read_series(series)?;
    let config = ctx.calibration();
    let reports = detect_stream(&model, &series, &config)?;
    let header = comment_block(&ctx.header());
    if let Some(path) = plot {
        let mut text = format!("{header}{STREAM_CSV_HEADER}\n");
        for (i, r) in reports.iter().enumerate() {
            let _ = writeln!(text, "{}", r.stream_csv_row(i + 1));
        }
        write(path, &text)?;
    }
    if let Some(path) = csv {
        let mut text = format!("{header}{REPORT_CSV_HEADER}\n");
        for r in &reports {
            let _ = writeln!(text, "{}", r.csv_row());
        }
        write(path, &text)?;
    }
    if let Some(path) = &ctx.common.out {
        let mut text = header.clone();
        for (i, r) in reports.iter().enumerate() {
            let _ = write!(text, "\nbatch_index: {}\n{}", i + 1, r.to_text());
        }
        write(path, &text)?;
    }
    let alarms: Vec<usize> = reports.iter().enumerate().filter(|(_, r)| r.alien_present).map(|(i, _)| i + 1).collect();
    let mut summary = format!("batches: {}\nthreshold: {}\n", reports.len(), format_float(model.threshold));
    let _ = writeln!(summary, "alarms: {}", alarms.len());
    let _ = writeln!(summary, "contaminated: {}", reports.iter().filter(|r| r.contaminated).count());
    if let Some(first) = alarms.first() {
        let _ = writeln!(summary, "first_alarm_batch: {first}");
        if let Some(d) = reports.iter().rev().find_map(|r| r.estimated_distance) {
            let _ = writeln!(summary, "distance_m: {}", format_float(d));
        }
    }
    Ok(summary)
}

fn cmd_locate(ctx: &Context, model: &Path, series: &Path) -> Result<String, CliError> {
    let (model, _) = io::read_model(model)?;
    let (series, _) = io::read_series(series)?;
    let config = ctx.calibration();
    config.validate()?;
    let n = series.len();
    if n < config.n_average {
        return Err(crate::DetectError::InsufficientCaptures {
            needed: config.n_average,
            available: n,
        }
        .into());
    }
    let actual = average(&series.slice(n - config.n_average..n))?;
    let m = config.smoothing;
    let located = locate_change(
        &causal_smooth(&model.reference_waveform, m),
        &causal_smooth(&actual, m),
        config.velocity,
        model.difference_sigma(config.n_average) / (m as f64).sqrt(),
        config.k_sigma,
        config.hold,
    )?;
    let text = match located {
        Some(l) => format!(
            "distance_m: {}\nonset_s: {}\n",
            format_float(l.distance),
            format_float(l.onset_time)
        ),
        None => "no change localized\n".to_string(),
    };
    if let Some(path) = &ctx.common.out {
        write(path, &format!("{}{text}", comment_block(&ctx.header())))?;
    }
    Ok(text)
}

fn cmd_bench(ctx: &Context, labels: Option<&str>, trials: usize, noise: f64, csv: Option<&Path>) -> Result<String, CliError> {
    let topo = ctx.topology()?;
    let labels: Vec<String> = match labels {
        Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        None => topo.stubs().iter().map(|s| s.label.clone()).collect(),
    };
    let config = BenchConfig {
        trials,
        noise_sigma: noise,
        seed: ctx.common.seed,
        pulse: None,
        spatial_step: ctx.overrides.spatial_step.unwrap_or(crate::sim::DEFAULT_SPATIAL_STEP),
        calibration: ctx.calibration(),
    };
    let table = benchmark_methods(topo, &labels, &config)?;
    let mut header = ctx.header();
    header.push("trials", trials).push_float("noise_sigma", noise);
    let block = comment_block(&header);
    let text = table.render_text();
    if let Some(path) = &ctx.common.out {
        write(path, &format!("{block}{text}"))?;
    }
    if let Some(path) = csv {
        write(path, &format!("{block}{}", table.render_csv()))?;
    }
    Ok(text)
}

fn cmd_resistance(ctx: &Context) -> Result<String, CliError> {
    let topo = ctx.topology()?;
    let total = total_bus_resistance(topo)?;
    let with_one_more = parallel_resistance([total, TRANSCEIVER_RESISTANCE]).expect("finite inputs");
    let text = format!(
        "total_resistance_ohm: {total:.4}\ndelta_r_ohm: {:.4}\n",
        total - with_one_more
    );
    if let Some(path) = &ctx.common.out {
        write(path, &format!("{}{text}", comment_block(&ctx.header())))?;
    }
    Ok(text)
}

/// Runs one parsed command and returns what it prints on success.
pub fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Simulate {
            common,
            pulse_width,
            amplitude,
            rise_time,
            n,
            noise,
            attach,
            attach_stub,
            attach_after,
            detach,
        } => {
            let ctx = Context::new("simulate", common)?;
            let args = SimulateArgs {
                pulse_width,
                amplitude,
                rise_time,
                n,
                noise,
                attach,
                attach_stub,
                attach_after,
                detach,
            };
            cmd_simulate(&ctx, args)
        }
        Command::Calibrate {
            common,
            series,
            threshold,
        } => cmd_calibrate(&Context::new("calibrate", common)?, &series, threshold),
        Command::Detect {
            common,
            model,
            series,
            plot,
            csv,
        } => cmd_detect(
            &Context::new("detect", common)?,
            &model,
            &series,
            plot.as_deref(),
            csv.as_deref(),
        ),
        Command::Locate { common, model, series } => cmd_locate(&Context::new("locate", common)?, &model, &series),
        Command::Bench {
            common,
            labels,
            trials,
            noise,
            csv,
        } => cmd_bench(&Context::new("bench", common)?, labels.as_deref(), trials, noise, csv.as_deref()),
        Command::Resistance { common } => cmd_resistance(&Context::new("resistance", common)?),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
