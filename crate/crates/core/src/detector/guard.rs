use super::DetectError;
use crate::sim::Waveform;

/// Settings of the bus-activity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardConfig {
    /// Pre-trigger gate in multiples of the per-capture noise sigma.
    pub level_sigma: f64,
    /// Lower bound for the pre-trigger gate, volts.
    pub min_level_gate: f64,
    /// Nominal CAN bit time.
    pub bit_time: f64,
    /// Differential voltage of a dominant bit.
    pub dominant_level: f64,
    /// Shortest run, in samples, that counts as a dominant plateau when it is
    /// cut off by the start or end of the record.
    pub edge_run: usize,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            level_sigma: 6.0,
            min_level_gate: 1e-3,
            bit_time: 2e-6,
            dominant_level: 2.0,
            edge_run: 20,
        }
    }
}

impl GuardConfig {
    pub fn validate(&self) -> Result<(), DetectError> {
        let ok = self.level_sigma >= 0.0
            && self.min_level_gate >= 0.0
            && self.bit_time > 0.0
            && self.dominant_level.is_finite()
            && self.dominant_level != 0.0
            && self.edge_run > 0;
        if ok {
            Ok(())
        } else {
            Err(DetectError::InvalidConfig(
                "guard needs non-negative gates, a positive bit time, a nonzero dominant level and edge_run >= 1"
                    .into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardVerdict {
    Clean,
    Contaminated,
}

/// Flags captures disturbed by bus traffic.
///
/// A capture is contaminated when any of its first `quiet_prefix` samples
/// exceeds `level_gate` in magnitude, or when it contains a plateau at or
/// above half the dominant level lasting one bit time. A plateau cut off by
/// the record boundary counts once it spans `edge_run` samples, since a
/// short capture cannot hold a whole bit.
pub fn activity_guard(w: &Waveform, quiet_prefix: usize, level_gate: f64, config: &GuardConfig) -> GuardVerdict {
    let samples = w.samples();
    let prefix = quiet_prefix.min(samples.len());
    if samples[..prefix].iter().any(|v| v.abs() > level_gate) {
        return GuardVerdict::Contaminated;
    }
    let sign = config.dominant_level.signum();
    let level = 0.5 * config.dominant_level.abs();
    let bit_samples = (config.bit_time / w.dt()).ceil().max(1.0) as usize;
    let n = samples.len();
    let mut start = None;
    for i in 0..=n {
        let high = i < n && sign * samples[i] >= level;
        match (high, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let run = i - s;
                let at_edge = s == 0 || i == n;
                if run >= bit_samples || (at_edge && run >= config.edge_run.min(bit_samples)) {
                    return GuardVerdict::Contaminated;
                }
                start = None;
            }
            _ => {}
        }
    }
    GuardVerdict::Clean
}
