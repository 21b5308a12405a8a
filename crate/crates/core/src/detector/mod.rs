//! Reference calibration, continuous detection, localisation of the change
//! and the method benchmark.

mod bench;
mod calibrate;
mod detect;
mod guard;
mod locate;
mod report;

pub use bench::{benchmark_methods, BenchConfig, BenchTable, Method, MethodRow, Verdict};
pub use calibrate::{calibrate, estimate_noise_sigma};
pub use detect::{detect, detect_stream, score_windows};
pub use guard::{activity_guard, GuardConfig, GuardVerdict};
pub use locate::{causal_smooth, locate_change, Localization};
pub use report::{REPORT_CSV_HEADER, STREAM_CSV_HEADER};

use crate::analysis::{AnalysisError, CoherenceParams, Taper, WelchParams};
use crate::sim::{SimError, Waveform};
use crate::topology::TopologyError;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_N_REFERENCE: usize = 300;
pub const DEFAULT_N_AVERAGE: usize = 30;
pub const DEFAULT_WINDOW_LENGTH: usize = 2048;
pub const DEFAULT_SEGMENT_LENGTH: usize = 1024;
pub const DEFAULT_THRESHOLD_MARGIN: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("{needed} captures required, {available} available")]
    InsufficientCaptures { needed: usize, available: usize },
    #[error("captures do not match the reference sampling: {0}")]
    SamplingMismatch(String),
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How the alarm threshold on K is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdPolicy {
    Fixed(f64),
    /// Largest baseline K plus a margin.
    BaselineMaxPlus(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::BaselineMaxPlus(DEFAULT_THRESHOLD_MARGIN)
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Fixed(v) => write!(f, "fixed:{v}"),
            ThresholdPolicy::BaselineMaxPlus(m) => write!(f, "baseline_max_plus:{m}"),
        }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = DetectError;

    /// Accepts `fixed:<value>` and `baseline_max_plus:<margin>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DetectError::InvalidConfig(format!("threshold policy '{s}' is not fixed:<v> or baseline_max_plus:<m>"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value = crate::units::parse_si(value).map_err(|_| bad())?;
        match kind {
            "fixed" => Ok(ThresholdPolicy::Fixed(value)),
            "baseline_max_plus" => Ok(ThresholdPolicy::BaselineMaxPlus(value)),
            _ => Err(bad()),
        }
    }
}

/// Everything calibration and detection need besides the captures.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub n_reference: usize,
    pub n_average: usize,
    /// Analysis window in samples, clipped to the record length.
    pub window_length: usize,
    pub threshold_policy: ThresholdPolicy,
    pub coherence: CoherenceParams,
    /// Sobolev order for the RQCC score.
    pub sobolev_order: f64,
    /// Propagation velocity used to turn echo delay into distance.
    pub velocity: f64,
    /// Onset gate in multiples of the difference noise.
    pub k_sigma: f64,
    /// Consecutive samples the difference must stay above the gate.
    pub hold: usize,
    /// Length of the causal moving average applied before the onset search.
    pub smoothing: usize,
    pub guard: GuardConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_reference: DEFAULT_N_REFERENCE,
            n_average: DEFAULT_N_AVERAGE,
            window_length: DEFAULT_WINDOW_LENGTH,
            threshold_policy: ThresholdPolicy::default(),
            coherence: CoherenceParams {
                welch: WelchParams {
                    segment_len: DEFAULT_SEGMENT_LENGTH,
                    overlap: 0.5,
                    taper: Taper::Hann,
                },
                ..CoherenceParams::default()
            },
            sobolev_order: 1.0,
            velocity: 2e8,
            k_sigma: 5.0,
            hold: 5,
            smoothing: 11,
            guard: GuardConfig::default(),
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let bad = |m: String| Err(DetectError::InvalidConfig(m));
        if self.n_average == 0 || self.n_reference < self.n_average {
            return bad(format!(
                "need n_reference >= n_average >= 1, got {} and {}",
                self.n_reference, self.n_average
            ));
        }
        if self.window_length < 2 * self.coherence.welch.segment_len {
            return bad(format!(
                "window length {} is shorter than two Welch segments of {}",
                self.window_length, self.coherence.welch.segment_len
            ));
        }
        if !(self.velocity.is_finite() && self.velocity > 0.0) {
            return bad(format!("velocity must be positive, got {}", self.velocity));
        }
        if !(self.k_sigma.is_finite() && self.k_sigma >= 0.0) || self.hold == 0 || self.smoothing == 0 {
            return bad("onset gate needs k_sigma >= 0, hold >= 1 and smoothing >= 1".into());
        }
        if !(self.sobolev_order.is_finite() && self.sobolev_order >= 0.0) {
            return bad(format!("Sobolev order must be non-negative, got {}", self.sobolev_order));
        }
        let (ThresholdPolicy::Fixed(v) | ThresholdPolicy::BaselineMaxPlus(v)) = self.threshold_policy;
        if !v.is_finite() {
            return bad("threshold value must be finite".into());
        }
        self.coherence.welch.validate()?;
        self.guard.validate()
    }

    /// Window and Welch segment for a record of `len` samples: the window is
    /// clipped to the record and the segment to half the window.
    pub(crate) fn fitted(&self, len: usize) -> (usize, CoherenceParams) {
        let window = self.window_length.min(len);
        let mut params = self.coherence;
        params.welch.segment_len = params.welch.segment_len.min(window / 2);
        (window, params)
    }
}

/// Per-method worst cases seen while calibrating, used by the benchmark to
/// set thresholds for the methods that have none of their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodBaselines {
    pub mse_max: f64,
    pub xcorr_min: f64,
    pub rqcc_max: f64,
}

/// The calibrated state. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub reference_waveform: Waveform,
    /// Per-capture noise standard deviation.
    pub noise_sigma_estimate: f64,
    /// Captures averaged into the reference.
    pub n_captures: usize,
    pub baseline_scores: Vec<f64>,
    pub method_baselines: MethodBaselines,
    pub threshold: f64,
    pub policy: ThresholdPolicy,
}

impl ReferenceModel {
    /// Noise standard deviation of `average(n_average captures) − reference`
    /// for independent captures.
    pub fn difference_sigma(&self, n_average: usize) -> f64 {
        self.noise_sigma_estimate * (1.0 / n_average as f64 + 1.0 / self.n_captures as f64).sqrt()
    }
}

/// Scores of all comparison methods for one averaged capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodScores {
    pub mse: f64,
    /// NaN when a window has zero variance.
    pub xcorr: f64,
    /// NaN when the reference window has zero norm.
    pub rqcc: f64,
    pub coherence_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// Sequence number of the newest capture that went into the average.
    pub timestamp: usize,
    pub scores: MethodScores,
    pub threshold: f64,
    pub alien_present: bool,
    pub estimated_distance: Option<f64>,
    /// Onset time of the change relative to injection, when localised.
    pub onset_time: Option<f64>,
    pub window_origin: usize,
    pub contaminated: bool,
}
