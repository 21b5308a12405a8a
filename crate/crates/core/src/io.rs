//! CSV interchange for captures, capture series and reference models.
//!
//! Every file may open with `# key=value` comment lines. The time column is
//! measured from the pulse injection, so oscilloscope exports triggered on
//! the pulse can be read directly. When `t0` and `dt` appear in the header
//! they take precedence over the time column.

use crate::detector::{MethodBaselines, ReferenceModel, ThresholdPolicy};
use crate::sim::{MeasurementSeries, SimError, Waveform};
use crate::units::format_float;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const WAVEFORM_HEADER: [&str; 2] = ["time_s", "voltage_v"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

/// Ordered `key=value` pairs carried in the comment header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header {
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_float(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, format_float(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn number(&self, key: &str) -> Result<Option<f64>, IoError> {
        self.get(key)
            .map(|v| v.trim().parse::<f64>().map_err(|_| format_err(format!("header {key}={v} is not a number"))))
            .transpose()
    }

    fn require(&self, key: &str) -> Result<f64, IoError> {
        self.number(key)?.ok_or_else(|| format_err(format!("header lacks {key}")))
    }

    fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
    }

    /// Collects `# key=value` lines from the top of `text`. Comment lines
    /// without `=` are skipped.
    fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .take_while(|l| l.trim_start().starts_with('#'))
            .filter_map(|l| {
                let (k, v) = l.trim_start().trim_start_matches('#').split_once('=')?;
                Some((k.trim().to_string(), v.trim().to_string()))
            })
            .collect();
        Self { entries }
    }
}

/// Comment header plus numeric columns of a parsed file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_table(text: &str) -> Result<Table, IoError> {
    let header = Header::parse(text);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| format_err(format!("row {}: '{f}' is not a number", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, columns, rows })
}

fn render_table(header: &Header, columns: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<String, IoError> {
    let mut writer = csv::Writer::from_writer(header.render().into_bytes());
    writer.write_record(columns)?;
    for row in rows {
        writer.write_record(row.iter().map(|v| format_float(*v)))?;
    }
    let bytes = writer.into_inner().map_err(|e| format_err(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Grid of a table: t0 and dt from the header when present, else from the
/// time column, which must advance in a fixed step.
fn grid(table: &Table) -> Result<(f64, f64), IoError> {
    let times: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    if times.is_empty() {
        return Err(format_err("no samples"));
    }
    if let (Some(t0), Some(dt)) = (table.header.number("t0")?, table.header.number("dt")?) {
        return Ok((t0, dt));
    }
    if times.len() < 2 {
        return Err(format_err("a single sample needs t0 and dt in the header"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(format_err("time column is not increasing"));
    }
    for (i, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-3 * dt {
            return Err(format_err(format!("time step changes at row {}", i + 2)));
        }
    }
    Ok((-times[0], dt))
}

fn grid_header(header: &Header, w: &Waveform) -> Header {
    let mut h = header.clone();
    h.entries.retain(|(k, _)| k != "t0" && k != "dt");
    h.push_float("t0", w.t0()).push_float("dt", w.dt());
    h
}

pub fn render_waveform(w: &Waveform, header: &Header) -> Result<String, IoError> {
    let columns = WAVEFORM_HEADER.map(String::from);
    let rows = w.samples().iter().enumerate().map(|(i, v)| vec![w.time(i) - w.t0(), *v]);
    render_table(&grid_header(header, w), &columns, rows)
}

pub fn parse_waveform(text: &str) -> Result<(Waveform, Header), IoError> {
    let table = parse_table(text)?;
    if table.columns != WAVEFORM_HEADER {
        return Err(format_err(format!(
            "expected columns time_s,voltage_v, found {}",
            table.columns.join(",")
        )));
    }
    let (t0, dt) = grid(&table)?;
    let w = Waveform::new(t0, dt, table.rows.iter().map(|r| r[1]).collect())?;
    Ok((w, table.header))
}

/// `time_s,capture_0,...,capture_{n-1}`.
pub fn render_series(series: &MeasurementSeries, header: &Header) -> Result<String, IoError> {
    let first = series.captures().first().ok_or_else(|| format_err("empty series"))?;
    let mut columns = vec!["time_s".to_string()];
    columns.extend((0..series.len()).map(|i| format!("capture_{i}")));
    let rows = (0..first.len()).map(|i| {
        let mut row = Vec::with_capacity(series.len() + 1);
        row.push(first.time(i) - first.t0());
        row.extend(series.captures().iter().map(|w| w.samples()[i]));
        row
    });
    render_table(&grid_header(header, first), &columns, rows)
}

/// Reads a series file. A two-column waveform file is accepted as a series
/// of one capture.
pub fn parse_series(text: &str) -> Result<(MeasurementSeries, Header), IoError> {
    let table = parse_table(text)?;
    if table.columns.first().map(String::as_str) != Some("time_s") || table.columns.len() < 2 {
        return Err(format_err("expected a time_s column followed by captures"));
    }
    let (t0, dt) = grid(&table)?;
    let captures = (1..table.columns.len())
        .map(|c| Waveform::new(t0, dt, table.rows.iter().map(|r| r[c]).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((MeasurementSeries::new(captures)?, table.header))
}

pub fn render_model(model: &ReferenceModel, header: &Header) -> Result<String, IoError> {
    let mut h = Header::new();
    h.push("format", "tdrguard-reference-model")
        .push("n_captures", model.n_captures)
        .push_float("noise_sigma", model.noise_sigma_estimate)
        .push_float("threshold", model.threshold)
        .push("policy", model.policy)
        .push(
            "baseline_scores",
            model.baseline_scores.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(";"),
        )
        .push_float("mse_max", model.method_baselines.mse_max)
        .push_float("xcorr_min", model.method_baselines.xcorr_min)
        .push_float("rqcc_max", model.method_baselines.rqcc_max);
    h.entries.extend(header.entries.iter().cloned());
    render_waveform(&model.reference_waveform, &h)
}

pub fn parse_model(text: &str) -> Result<(ReferenceModel, Header), IoError> {
    let (w, header) = parse_waveform(text)?;
    if header.get("format") != Some("tdrguard-reference-model") {
        return Err(format_err("not a reference model file"));
    }
    let policy = header
        .get("policy")
        .ok_or_else(|| format_err("header lacks policy"))?
        .parse::<ThresholdPolicy>()
        .map_err(|e| format_err(e.to_string()))?;
    let baseline_scores = header
        .get("baseline_scores")
        .unwrap_or("")
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format_err(format!("baseline score '{s}'"))))
        .collect::<Result<Vec<_>, _>>()?;
    let n_captures = header.require("n_captures")?;
    if !(n_captures >= 1.0 && n_captures.fract() == 0.0) {
        return Err(format_err("n_captures must be a positive integer"));
    }
    let noise_sigma_estimate = header.require("noise_sigma")?;
    if !(noise_sigma_estimate >= 0.0) {
        return Err(format_err("noise_sigma must be non-negative"));
    }
    let model = ReferenceModel {
        reference_waveform: w,
        noise_sigma_estimate,
        n_captures: n_captures as usize,
        baseline_scores,
        method_baselines: MethodBaselines {
            mse_max: header.require("mse_max")?,
            xcorr_min: header.require("xcorr_min")?,
            rqcc_max: header.require("rqcc_max")?,
        },
        threshold: header.require("threshold")?,
        policy,
    };
    Ok((model, header))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_waveform(path: &Path) -> Result<(Waveform, Header), IoError> {
    parse_waveform(&read_text(path)?)
}

pub fn read_series(path: &Path) -> Result<(MeasurementSeries, Header), IoError> {
    parse_series(&read_text(path)?)
}

pub fn read_model(path: &Path) -> Result<(ReferenceModel, Header), IoError> {
    parse_model(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::noisy_series;

    fn wave() -> Waveform {
        Waveform::new(1e-9, 1e-10, vec![0.0, 0.5, -0.25, 1e-7, 3.0]).unwrap()
    }

    #[test]
    fn waveform_round_trip() {
        let mut h = Header::new();
        h.push("seed", 7);
        let text = render_waveform(&wave(), &h).unwrap();
        assert!(text.starts_with("# seed=7\n# t0=1e-9\n# dt=1e-10\ntime_s,voltage_v\n"));
        let (w, h2) = parse_waveform(&text).unwrap();
        assert_eq!(w, wave());
        assert_eq!(h2.get("seed"), Some("7"));
    }

    #[test]
    fn grid_from_time_column() {
        let text = "time_s,voltage_v\n-2e-9,0\n-1e-9,0\n0,1\n1e-9,0.5\n";
        let (w, _) = parse_waveform(text).unwrap();
        assert!((w.t0() - 2e-9).abs() < 1e-21);
        assert!((w.dt() - 1e-9).abs() < 1e-21);
        assert_eq!(w.pre_trigger_len(), 2);
        assert!(parse_waveform("time_s,voltage_v\n0,0\n1,0\n3,0\n").is_err());
        assert!(parse_waveform("t,v\n0,0\n1,0\n").is_err());
        assert!(parse_waveform("time_s,voltage_v\n0,x\n1,0\n").is_err());
    }

    #[test]
    fn series_round_trip() {
        let s = noisy_series(&wave(), 0.1, 3, 4).unwrap();
        let text = render_series(&s, &Header::new()).unwrap();
        assert!(text.contains("time_s,capture_0,capture_1,capture_2,capture_3\n"));
        let (back, _) = parse_series(&text).unwrap();
        assert_eq!(back, s);
        let (single, _) = parse_series(&render_waveform(&wave(), &Header::new()).unwrap()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn model_round_trip() {
        let model = ReferenceModel {
            reference_waveform: wave(),
            noise_sigma_estimate: 0.01,
            n_captures: 300,
            baseline_scores: vec![0.0, 0.125, 3e-5],
            method_baselines: MethodBaselines {
                mse_max: 1e-6,
                xcorr_min: 0.999,
                rqcc_max: 0.02,
            },
            threshold: 0.135,
            policy: ThresholdPolicy::BaselineMaxPlus(0.01),
        };
        let text = render_model(&model, &Header::new()).unwrap();
        assert_eq!(parse_model(&text).unwrap().0, model);
        assert!(parse_model(&render_waveform(&wave(), &Header::new()).unwrap()).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_series(Path::new("/nonexistent/ref.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/ref.csv"));
    }
}
