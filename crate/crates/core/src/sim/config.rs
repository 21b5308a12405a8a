use super::{PulseSpec, SimError};
use crate::topology::Topology;

pub const DEFAULT_SPATIAL_STEP: f64 = 0.01;
pub const DEFAULT_CFL: f64 = 1.0;

/// Discretisation and acquisition settings for one simulated capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub spatial_step: f64,
    pub time_step: f64,
    pub duration: f64,
    pub cfl_factor: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

/// Fastest propagation velocity anywhere on the network.
pub(crate) fn max_velocity(topology: &Topology) -> f64 {
    topology
        .segments()
        .iter()
        .map(|s| s.params.velocity())
        .chain(topology.stubs().iter().map(|s| s.params.velocity()))
        .fold(0.0, f64::max)
}

impl SimConfig {
    /// 1 cm cells at the Courant limit and a record long enough for a round
    /// trip over every metre of cable plus five pulse widths after injection.
    pub fn for_topology(topology: &Topology, pulse: &PulseSpec) -> Self {
        Self::with_spatial_step(topology, pulse, DEFAULT_SPATIAL_STEP)
    }

    pub fn with_spatial_step(topology: &Topology, pulse: &PulseSpec, spatial_step: f64) -> Self {
        let v = max_velocity(topology);
        let time_step = DEFAULT_CFL * spatial_step / v;
        let duration = pulse.delay
            + 2.0 * topology.total_cable_length() / topology.propagation_velocity()
            + 5.0 * pulse.width;
        Self {
            spatial_step,
            time_step,
            duration,
            cfl_factor: DEFAULT_CFL,
            noise_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn stability_limit(&self, topology: &Topology) -> f64 {
        self.cfl_factor * self.spatial_step / max_velocity(topology)
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.spatial_step.is_finite() && self.spatial_step > 0.0) {
            return bad(format!("spatial step must be positive, got {}", self.spatial_step));
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return bad(format!("time step must be positive, got {}", self.time_step));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return bad(format!("cfl factor must lie in (0, 1], got {}", self.cfl_factor));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        let limit = self.stability_limit(topology);
        if self.time_step > limit * (1.0 + 1e-12) {
            return Err(SimError::Unstable {
                time_step: self.time_step,
                limit,
            });
        }
        Ok(())
    }

    /// Number of time steps after t = 0 covered by `duration`.
    pub fn steps(&self) -> usize {
        (self.duration / self.time_step).ceil() as usize
    }
}
