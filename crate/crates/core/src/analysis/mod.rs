//! Comparison of a captured waveform against a reference.
//!
//! Every method works on a pair of equal-length [`SignalWindow`]s cut from
//! the two traces around their largest disagreement.

mod coherence;
mod metrics;
mod spectral;
mod window;

pub use coherence::{
    detect_peaks, extended_coherence, CoherenceParams, CoherenceResult, Peak, DEFAULT_NOISE_GATE,
    DEFAULT_PEAK_THRESHOLD,
};
pub use metrics::{mse, rqcc, sobolev_norm, xcorr_score};
pub use spectral::{coherence, gated_coherence, welch_spectra, Spectrum, Taper, WelchParams};
pub use window::{extract_window, SignalWindow};

use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;
use thiserror::Error;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Cached FFT plan of length `n`.
pub(crate) fn fft_plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample intervals differ: {0:e} s vs {1:e} s")]
    SamplingMismatch(f64, f64),
    #[error("window of {requested} samples does not fit a {available}-sample waveform")]
    WindowTooLong { requested: usize, available: usize },
    #[error("window is empty")]
    Empty,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("reference has zero Sobolev norm")]
    ZeroNorm,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{segments} Welch segment(s) from {len} samples; at least 2 are required")]
    TooFewSegments { segments: usize, len: usize },
    #[error("spectra do not share a frequency grid")]
    GridMismatch,
}
