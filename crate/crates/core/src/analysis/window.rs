use super::AnalysisError;
use crate::sim::Waveform;

/// A contiguous piece of a waveform handed to a comparison method.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub samples: Vec<f64>,
    pub dt: f64,
    /// Index of the first sample in the parent waveform.
    pub origin_index: usize,
}

impl SignalWindow {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self, AnalysisError> {
        if samples.is_empty() {
            return Err(AnalysisError::Empty);
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(AnalysisError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            samples,
            dt,
            origin_index: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub(crate) fn check_pair(a: &SignalWindow, b: &SignalWindow) -> Result<(), AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch(a.len(), b.len()));
    }
    if (a.dt - b.dt).abs() > 1e-9 * a.dt.abs().max(b.dt.abs()) {
        return Err(AnalysisError::SamplingMismatch(a.dt, b.dt));
    }
    Ok(())
}

/// Cuts `length` samples from both traces, centred on the first index of
/// the largest |act − ref| and shifted inwards at the record boundaries.
pub fn extract_window(
    reference: &Waveform,
    actual: &Waveform,
    length: usize,
) -> Result<(SignalWindow, SignalWindow), AnalysisError> {
    if reference.len() != actual.len() {
        return Err(AnalysisError::LengthMismatch(reference.len(), actual.len()));
    }
    if (reference.dt() - actual.dt()).abs() > 1e-9 * reference.dt() {
        return Err(AnalysisError::SamplingMismatch(reference.dt(), actual.dt()));
    }
    if length == 0 {
        return Err(AnalysisError::Empty);
    }
    let n = reference.len();
    if length > n {
        return Err(AnalysisError::WindowTooLong {
            requested: length,
            available: n,
        });
    }
    let mut center = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, (r, a)) in reference.samples().iter().zip(actual.samples()).enumerate() {
        let d = (a - r).abs();
        if d > best {
            best = d;
            center = i;
        }
    }
    let start = center.saturating_sub(length / 2).min(n - length);
    let cut = |w: &Waveform| SignalWindow {
        samples: w.samples()[start..start + length].to_vec(),
        dt: w.dt(),
        origin_index: start,
    };
    Ok((cut(reference), cut(actual)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wf(samples: Vec<f64>) -> Waveform {
        Waveform::new(0.0, 1e-9, samples).unwrap()
    }

    #[test]
    fn identical_inputs_tie_break_to_start() {
        let r = wf((0..1000).map(|i| (i as f64).sin()).collect());
        let (a, b) = extract_window(&r, &r, 128).unwrap();
        assert_eq!(a.origin_index, 0);
        assert_eq!(a, b);
    }

    #[test]
    fn spike_centres_window() {
        let r = wf(vec![0.0; 1000]);
        let mut s = vec![0.0; 1000];
        s[500] = 1.0;
        let (a, b) = extract_window(&r, &wf(s), 128).unwrap();
        assert_eq!(a.origin_index, 436);
        assert_eq!(b.origin_index, 436);
        assert_eq!(b.samples[64], 1.0);
    }

    #[test]
    fn clipped_at_both_boundaries() {
        let r = wf(vec![0.0; 1000]);
        let mut s = vec![0.0; 1000];
        s[10] = -1.0;
        assert_eq!(extract_window(&r, &wf(s), 128).unwrap().0.origin_index, 0);
        let mut s = vec![0.0; 1000];
        s[995] = 1.0;
        assert_eq!(extract_window(&r, &wf(s), 128).unwrap().0.origin_index, 872);
    }

    #[test]
    fn mismatches_are_errors() {
        let r = wf(vec![0.0; 100]);
        assert!(extract_window(&r, &wf(vec![0.0; 99]), 10).is_err());
        assert!(extract_window(&r, &r, 101).is_err());
        let other = Waveform::new(0.0, 2e-9, vec![0.0; 100]).unwrap();
        assert!(extract_window(&r, &other, 10).is_err());
    }
}
