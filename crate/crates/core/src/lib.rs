//! Detection of alien devices on CAN-style buses by time-domain
//! reflectometry.
//!
//! The crate is split along the processing chain:
//!
//! - [`topology`]: the physical bus and its impedance arithmetic
//! - [`sim`]: FDTD simulation of TDR captures plus a ray-tracing oracle
//! - [`analysis`]: waveform comparison (MSE, cross-correlation, Sobolev
//!   distance, coherence and the phase-weighted coherence score)
//! - [`detector`]: calibration, detection, localisation and benchmarking
//! - [`io`]: CSV interchange for captures, series and reference models

pub mod analysis;
pub mod cli;
pub mod detector;
pub mod io;
pub mod sim;
pub mod topology;
pub mod units;

pub use analysis::AnalysisError;
pub use detector::DetectError;
pub use sim::SimError;
pub use topology::TopologyError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}
