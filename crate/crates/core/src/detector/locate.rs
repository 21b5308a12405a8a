use super::DetectError;
use crate::sim::Waveform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    /// One-way cable distance from the measurement port, metres.
    pub distance: f64,
    /// Onset of the change relative to injection, seconds.
    pub onset_time: f64,
    pub onset_index: usize,
}

/// Finds where `actual` first departs from `reference`.
///
/// The onset is the first sample of the earliest run of `hold` samples whose
/// |actual − reference| exceeds `k_sigma · noise_sigma`; the distance is
/// half the round trip at `velocity`. With `noise_sigma = 0` the gate falls
/// back to 1e-9 of the reference peak so that roundoff never counts.
/// Returns `None` when no run qualifies.
pub fn locate_change(
    reference: &Waveform,
    actual: &Waveform,
    velocity: f64,
    noise_sigma: f64,
    k_sigma: f64,
    hold: usize,
) -> Result<Option<Localization>, DetectError> {
    if !reference.same_grid(actual) {
        return Err(DetectError::SamplingMismatch(format!(
            "{} samples at {:e} s vs {} samples at {:e} s",
            reference.len(),
            reference.dt(),
            actual.len(),
            actual.dt()
        )));
    }
    if !(velocity.is_finite() && velocity > 0.0) {
        return Err(DetectError::InvalidConfig(format!("velocity must be positive, got {velocity}")));
    }
    if !(noise_sigma >= 0.0 && k_sigma >= 0.0) || hold == 0 {
        return Err(DetectError::InvalidConfig(
            "onset gate needs noise_sigma >= 0, k_sigma >= 0 and hold >= 1".into(),
        ));
    }
    let peak = reference.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gate = (k_sigma * noise_sigma).max(1e-9 * peak);
    let mut run = 0;
    for (i, (a, r)) in actual.samples().iter().zip(reference.samples()).enumerate() {
        if (a - r).abs() > gate {
            run += 1;
            if run == hold {
                let onset_index = i + 1 - hold;
                let onset_time = reference.time(onset_index) - reference.t0();
                return Ok(Some(Localization {
                    distance: velocity * onset_time / 2.0,
                    onset_time,
                    onset_index,
                }));
            }
        } else {
            run = 0;
        }
    }
    Ok(None)
}

/// Causal moving average over `len` samples; the first samples average over
/// what is available. Leaves step onsets in place.
pub fn causal_smooth(w: &Waveform, len: usize) -> Waveform {
    let len = len.max(1);
    let s = w.samples();
    let mut out = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    for i in 0..s.len() {
        acc += s[i];
        if i >= len {
            acc -= s[i - len];
        }
        out.push(acc / (i + 1).min(len) as f64);
    }
    w.with_samples(out).expect("same length")
}
