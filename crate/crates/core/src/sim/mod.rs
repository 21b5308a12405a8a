//! TDR simulation: pulse injection into a [`Topology`](crate::topology::Topology),
//! reflection capture, noise, averaging and traffic overlay.

mod acquire;
mod config;
mod fdtd;
mod oracle;
mod pulse;
mod traffic;
mod waveform;

pub use acquire::{add_noise, capture_seed, capture_series, noisy_series, noisy_series_from};
pub use config::{SimConfig, DEFAULT_CFL, DEFAULT_SPATIAL_STEP};
pub use fdtd::{simulate_tdr, FdtdSolver};
pub use oracle::{bounce_arrivals, bounce_oracle, Arrival};
pub use pulse::{PulseShape, PulseSpec, DEFAULT_PULSE_DELAY, DEFAULT_PULSE_WIDTH, DEFAULT_RISE_TIME};
pub use traffic::{superimpose_can_traffic, Bit, CanOverlay};
pub use waveform::{average, MeasurementSeries, Waveform};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step {time_step:e} s exceeds the stability limit {limit:e} s")]
    Unstable { time_step: f64, limit: f64 },
    #[error("{entity}: length {length} m cannot be snapped to the grid (nearest {snapped} m)")]
    Snapping { entity: String, length: f64, snapped: f64 },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("measurement series is empty")]
    EmptySeries,
    #[error("mismatched captures: {0}")]
    MismatchedSeries(String),
    #[error("topology outside oracle scope: {0}")]
    OracleScope(String),
}
