use super::calibrate::calibrate;
use super::detect::score_windows;
use super::{CalibrationConfig, DetectError, MethodScores, ReferenceModel};
use crate::sim::{average, capture_seed, noisy_series, simulate_tdr, PulseSpec, SimConfig, DEFAULT_SPATIAL_STEP};
use crate::topology::{Topology, TopologyError};
use rayon::prelude::*;
use std::fmt::{self, Write as _};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mse,
    Xcorr,
    Rqcc,
    Coherence,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mse, Method::Xcorr, Method::Rqcc, Method::Coherence];

    pub fn key(self) -> &'static str {
        match self {
            Method::Mse => "mse",
            Method::Xcorr => "xcorr",
            Method::Rqcc => "rqcc",
            Method::Coherence => "coherence_k",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Method::Mse => "MSE",
            Method::Xcorr => "Cross-correlation",
            Method::Rqcc => "RQCC",
            Method::Coherence => "Extended coherence",
        }
    }

    /// Whether `scores` differ from the calibration beyond this method's
    /// alarm level. Methods without a threshold of their own alarm at twice
    /// the worst deviation seen during calibration.
    fn detects(self, scores: &MethodScores, model: &ReferenceModel) -> bool {
        let b = &model.method_baselines;
        match self {
            Method::Mse => scores.mse > 2.0 * b.mse_max + 1e-15,
            Method::Xcorr => 1.0 - scores.xcorr > 2.0 * (1.0 - b.xcorr_min) + 1e-9,
            Method::Rqcc => scores.rqcc > 2.0 * b.rqcc_max + 1e-9,
            Method::Coherence => scores.coherence_k > model.threshold,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Detected in every trial.
    Always,
    /// Detected in some trials.
    Partial,
    Never,
}

impl Verdict {
    pub fn from_counts(detected: usize, trials: usize) -> Self {
        match detected {
            0 => Verdict::Never,
            d if d == trials => Verdict::Always,
            _ => Verdict::Partial,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Always => "✓",
            Verdict::Partial => "(✓)",
            Verdict::Never => "−",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub trials: usize,
    /// Per-capture noise standard deviation.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Stimulus; `None` uses the topology default.
    pub pulse: Option<PulseSpec>,
    pub spatial_step: f64,
    pub calibration: CalibrationConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            noise_sigma: 0.0,
            seed: 0,
            pulse: None,
            spatial_step: DEFAULT_SPATIAL_STEP,
            calibration: CalibrationConfig::default(),
        }
    }
}

/// Detection counts of one method, one entry per ECU label.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub detected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub labels: Vec<String>,
    pub trials: usize,
    pub rows: Vec<MethodRow>,
}

impl BenchTable {
    pub fn row(&self, method: Method) -> &MethodRow {
        self.rows.iter().find(|r| r.method == method).expect("every method has a row")
    }

    pub fn verdict(&self, method: Method, label_index: usize) -> Verdict {
        Verdict::from_counts(self.row(method).detected[label_index], self.trials)
    }

    pub fn rate(&self, method: Method, label_index: usize) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        self.row(method).detected[label_index] as f64 / self.trials as f64
    }

    /// Fixed-width text table with one column per removed ECU.
    pub fn render_text(&self) -> String {
        let first = Method::ALL.iter().map(|m| m.title().len()).max().unwrap_or(0).max(6);
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                (0..self.labels.len())
                    .map(|i| {
                        format!(
                            "{} {:.0}%",
                            self.verdict(r.method, i).symbol(),
                            100.0 * self.rate(r.method, i)
                        )
                    })
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| cells.iter().map(|c| c[i].chars().count()).chain([l.chars().count()]).max().unwrap())
            .collect();
        let mut out = format!("{:first$}", "Method");
        for (l, w) in self.labels.iter().zip(&widths) {
            let _ = write!(out, "  {l:>w$}");
        }
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&cells) {
            let _ = write!(out, "{:first$}", r.method.title());
            for (c, w) in row.iter().zip(&widths) {
                let _ = write!(out, "  {c:>w$}");
            }
            out.push('\n');
        }
        out
    }

    /// One line per (method, label) cell after the header.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("method,label,detected,trials,rate,verdict\n");
        for r in &self.rows {
            for (i, label) in self.labels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.method.key(),
                    label,
                    r.detected[i],
                    self.trials,
                    self.rate(r.method, i),
                    self.verdict(r.method, i).symbol()
                );
            }
        }
        out
    }
}

/// Simulates unplugging each labelled ECU and counts, per method, the trials
/// in which the change is detected.
///
/// Each trial calibrates on fresh noisy captures of the intact bus and then
/// scores one averaged batch per removed ECU. Trials run in parallel with
/// seeds derived from `config.seed`, so results do not depend on scheduling.
pub fn benchmark_methods(topology: &Topology, labels: &[String], config: &BenchConfig) -> Result<BenchTable, DetectError> {
    config.calibration.validate()?;
    if let Some(l) = labels.iter().find(|l| topology.stub(l).is_none()) {
        return Err(TopologyError::UnknownLabel(l.clone()).into());
    }
    let mut table = BenchTable {
        labels: labels.to_vec(),
        trials: config.trials,
        rows: Method::ALL
            .iter()
            .map(|&method| MethodRow {
                method,
                detected: vec![0; labels.len()],
            })
            .collect(),
    };
    if labels.is_empty() || config.trials == 0 {
        return Ok(table);
    }
    let pulse = config.pulse.unwrap_or_else(|| PulseSpec::for_topology(topology));
    let sim = SimConfig::with_spatial_step(topology, &pulse, config.spatial_step);
    let intact = simulate_tdr(topology, &pulse, &sim)?;
    let removed = labels
        .par_iter()
        .map(|l| Ok(simulate_tdr(&topology.detach_device(l)?, &pulse, &sim)?))
        .collect::<Result<Vec<_>, DetectError>>()?;
    let cal = &config.calibration;
    let hits = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = capture_seed(config.seed, t as u64);
            let model = calibrate(&noisy_series(&intact, config.noise_sigma, trial_seed, cal.n_reference)?, cal)?;
            let sigma_d = model.difference_sigma(cal.n_average);
            let density = sigma_d * sigma_d * intact.dt();
            removed
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let seed = capture_seed(trial_seed ^ 0x5EED_0000_0000_0000, i as u64);
                    let actual = average(&noisy_series(w, config.noise_sigma, seed, cal.n_average)?)?;
                    let (scores, _) = score_windows(&model.reference_waveform, &actual, cal, density)?;
                    Ok(Method::ALL.map(|m| m.detects(&scores, &model)))
                })
                .collect::<Result<Vec<_>, DetectError>>()
        })
        .collect::<Result<Vec<_>, DetectError>>()?;
    for trial in hits {
        for (i, flags) in trial.iter().enumerate() {
            for (row, hit) in table.rows.iter_mut().zip(flags) {
                row.detected[i] += *hit as usize;
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_symbols() {
        assert_eq!(Verdict::from_counts(5, 5), Verdict::Always);
        assert_eq!(Verdict::from_counts(2, 5), Verdict::Partial);
        assert_eq!(Verdict::from_counts(0, 5), Verdict::Never);
        assert_eq!(Verdict::Partial.symbol(), "(✓)");
    }

    #[test]
    fn empty_label_list_gives_header_only() {
        let topo = crate::topology::parse_topology(
            "line z0=120 v=2e8\nbus length=2\nterm pos=0 r=120\nterm pos=end r=120\nmeas pos=0\nnode label=A pos=1 stub=0.1\n",
        )
        .unwrap();
        let table = benchmark_methods(&topo, &[], &BenchConfig::default()).unwrap();
        assert_eq!(table.render_csv(), "method,label,detected,trials,rate,verdict\n");
        assert_eq!(table.render_text().lines().count(), 5);
        let err = benchmark_methods(&topo, &["B".to_string()], &BenchConfig::default()).unwrap_err();
        assert_eq!(err, DetectError::Topology(TopologyError::UnknownLabel("B".into())));
    }
}
