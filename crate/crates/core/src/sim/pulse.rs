use super::SimError;
use crate::topology::Topology;

/// Default injection instant; leaves a quiet pre-trigger stretch in every
/// capture for the activity guard.
pub const DEFAULT_PULSE_DELAY: f64 = 10e-9;
/// Default pulse width.
pub const DEFAULT_PULSE_WIDTH: f64 = 3e-9;
/// Default edge duration of the rectangular pulse.
pub const DEFAULT_RISE_TIME: f64 = 300e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    /// Flat top with linear edges of `rise_time`; the half-maximum points
    /// lie exactly `width` apart.
    Rectangular,
    /// Gaussian whose full width at half maximum equals the pulse width,
    /// peaking two widths after the injection instant.
    Gaussian,
}

/// The TDR stimulus: an ideal open-circuit pulse behind a series source
/// impedance at the measurement port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub amplitude: f64,
    pub width: f64,
    pub shape: PulseShape,
    pub source_impedance: f64,
    /// Injection instant measured from the capture start.
    pub delay: f64,
    /// Edge duration of the rectangular shape. Zero gives ideal steps.
    pub rise_time: f64,
}

impl PulseSpec {
    /// 1 V, 3 ns rectangular pulse with 300 ps edges, matched to the line at
    /// the port.
    pub fn for_topology(topology: &Topology) -> Self {
        Self {
            amplitude: 1.0,
            width: DEFAULT_PULSE_WIDTH,
            shape: PulseShape::Rectangular,
            source_impedance: topology.params_at(topology.measurement_position()).impedance(),
            delay: DEFAULT_PULSE_DELAY,
            rise_time: DEFAULT_RISE_TIME,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidPulse(m));
        if !(self.width.is_finite() && self.width > 0.0) {
            return bad(format!("width must be positive, got {}", self.width));
        }
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return bad(format!("amplitude must be finite and nonzero, got {}", self.amplitude));
        }
        if !(self.source_impedance.is_finite() && self.source_impedance >= 0.0) {
            return bad(format!(
                "source impedance must be non-negative, got {}",
                self.source_impedance
            ));
        }
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return bad(format!("delay must be non-negative, got {}", self.delay));
        }
        if !(self.rise_time >= 0.0 && self.rise_time <= self.width) {
            return bad(format!(
                "rise time must lie in [0, width], got {}",
                self.rise_time
            ));
        }
        Ok(())
    }

    /// Open-circuit source voltage at absolute time `t`. Zero before `delay`.
    pub fn value(&self, t: f64) -> f64 {
        let rel = t - self.delay;
        if rel < 0.0 {
            return 0.0;
        }
        match self.shape {
            PulseShape::Rectangular => {
                let r = self.rise_time;
                let level = if rel < r {
                    rel / r
                } else if rel < self.width {
                    1.0
                } else if rel < self.width + r {
                    1.0 - (rel - self.width) / r
                } else {
                    0.0
                };
                self.amplitude * level
            }
            PulseShape::Gaussian => {
                let x = (rel - 2.0 * self.width) / self.width;
                self.amplitude * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
            }
        }
    }

    /// Time after `delay` by which the source has (numerically) returned to zero.
    pub fn active_duration(&self) -> f64 {
        match self.shape {
            PulseShape::Rectangular => self.width + self.rise_time,
            PulseShape::Gaussian => 5.0 * self.width,
        }
    }
}
