use super::spectral::{gated_coherence, welch_spectra, WelchParams};
use super::{AnalysisError, SignalWindow};

pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.2;
pub const DEFAULT_NOISE_GATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    pub welch: WelchParams,
    /// τ_p: a dip only counts when 1 − C strictly exceeds it.
    pub peak_threshold: f64,
    /// White-noise density s²·dt expected in `actual − reference` when
    /// nothing changed. Zero disables the gate.
    pub noise_density: f64,
    /// Bins where the difference carries less than `noise_gate` times the
    /// expected noise are treated as coherent.
    pub noise_gate: f64,
}

impl Default for CoherenceParams {
    fn default() -> Self {
        Self {
            welch: WelchParams::default(),
            peak_threshold: DEFAULT_PEAK_THRESHOLD,
            noise_density: 0.0,
            noise_gate: DEFAULT_NOISE_GATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub frequency: f64,
    /// 1 − C at the peak.
    pub incoherence: f64,
    /// |φ| of the cross spectrum at the peak, radians.
    pub phase_weight: f64,
}

impl Peak {
    pub fn contribution(&self) -> f64 {
        self.incoherence * self.phase_weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceResult {
    pub frequencies: Vec<f64>,
    pub coherence: Vec<f64>,
    pub cross_phase: Vec<f64>,
    pub peaks: Vec<Peak>,
    pub score_k: f64,
}

/// Indices of local maxima of `values` strictly above `threshold`.
///
/// A run of equal values counts as one maximum when both its neighbours are
/// lower (the ends of the slice count as lower). The run is reported at its
/// first index.
pub fn detect_peaks(values: &[f64], threshold: f64) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = values.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        if left_lower && right_lower && values[i] > threshold {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

/// Phase-weighted coherence score K = Σ (1 − C) · |φ| over the dips of
/// 1 − C that exceed the peak threshold.
///
/// `reference` takes the x role, so φ is the phase of the actual trace
/// relative to the reference. K is exactly 0 when no dip clears the
/// threshold. With a noise density set, bins where the two windows do not
/// differ beyond the noise are ignored.
pub fn extended_coherence(
    reference: &SignalWindow,
    actual: &SignalWindow,
    params: &CoherenceParams,
) -> Result<CoherenceResult, AnalysisError> {
    if !(params.peak_threshold.is_finite() && params.noise_gate >= 0.0 && params.noise_density >= 0.0) {
        return Err(AnalysisError::InvalidParameter(
            "peak threshold must be finite and noise settings non-negative".into(),
        ));
    }
    let (pxx, pyy, pxy) = welch_spectra(reference, actual, &params.welch)?;
    let diff: Vec<f64> = actual.samples.iter().zip(&reference.samples).map(|(a, r)| a - r).collect();
    let diff = SignalWindow::new(diff, reference.dt)?;
    let (pdd, _, _) = welch_spectra(&diff, &diff, &params.welch)?;
    let coherence = gated_coherence(&pxx, &pyy, &pxy, &pdd, params.noise_gate * params.noise_density)?;
    let cross_phase: Vec<f64> = pxy.values.iter().map(|c| c.arg()).collect();
    let incoherence: Vec<f64> = coherence.iter().map(|c| 1.0 - c).collect();
    let peaks: Vec<Peak> = detect_peaks(&incoherence, params.peak_threshold)
        .into_iter()
        .map(|k| Peak {
            index: k,
            frequency: pxx.frequencies[k],
            incoherence: incoherence[k],
            phase_weight: cross_phase[k].abs(),
        })
        .collect();
    let score_k = peaks.iter().map(Peak::contribution).fold(0.0, |a, b| a + b);
    Ok(CoherenceResult {
        frequencies: pxx.frequencies,
        coherence,
        cross_phase,
        peaks,
        score_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn echo_pair(extra: f64) -> (SignalWindow, SignalWindow) {
        let pulse = |c: f64, w: f64, i: usize| (-((i as f64 - c) / w).powi(2)).exp();
        let r: Vec<f64> = (0..256)
            .map(|i| pulse(60.0, 4.0, i) - 0.3 * pulse(150.0, 6.0, i) + 0.01 * ((i * 37 % 17) as f64 - 8.0) / 8.0)
            .collect();
        let a: Vec<f64> = r.iter().enumerate().map(|(i, v)| v + extra * pulse(110.0, 3.0, i)).collect();
        (SignalWindow::new(r, 1e-10).unwrap(), SignalWindow::new(a, 1e-10).unwrap())
    }

    #[test]
    fn peaks_on_plateaus_and_edges() {
        assert_eq!(detect_peaks(&[0.5, 0.1, 0.3, 0.3, 0.1, 0.9], 0.2), vec![0, 2, 5]);
        assert_eq!(detect_peaks(&[0.1, 0.3, 0.3, 0.4], 0.2), vec![3]);
        assert!(detect_peaks(&[0.2, 0.1, 0.2], 0.2).is_empty());
        assert!(detect_peaks(&[0.7; 4], 0.2) == vec![0]);
    }

    #[test]
    fn identical_windows_score_zero() {
        let (r, _) = echo_pair(0.0);
        let res = extended_coherence(&r, &r, &CoherenceParams::default()).unwrap();
        assert!(res.coherence.iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert!(res.peaks.is_empty());
        assert!(res.score_k == 0.0 && res.score_k.is_sign_positive());
    }

    #[test]
    fn added_echo_scores_positive() {
        let (r, a) = echo_pair(0.4);
        let res = extended_coherence(&r, &a, &CoherenceParams::default()).unwrap();
        assert!(res.score_k > 0.0);
        assert!(res.peaks.iter().all(|p| p.incoherence > 0.2));
    }

    #[test]
    fn unreachable_threshold_gives_zero() {
        let (r, a) = echo_pair(0.4);
        let params = CoherenceParams {
            peak_threshold: 1.0,
            ..CoherenceParams::default()
        };
        assert_eq!(extended_coherence(&r, &a, &params).unwrap().score_k, 0.0);
    }
}
