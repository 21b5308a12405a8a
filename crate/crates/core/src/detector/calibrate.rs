use super::detect::score_windows;
use super::{CalibrationConfig, DetectError, MethodBaselines, ReferenceModel, ThresholdPolicy};
use crate::sim::{average, MeasurementSeries};

/// Per-capture noise standard deviation: the square root of the per-sample
/// unbiased variance across captures, averaged over the record. Zero for a
/// single capture.
pub fn estimate_noise_sigma(series: &MeasurementSeries) -> f64 {
    let captures = series.captures();
    let n = captures.len();
    if n < 2 {
        return 0.0;
    }
    // deviations from the first capture, so identical captures give exactly 0
    let first = captures[0].samples();
    let len = first.len();
    let mut mean = vec![0.0; len];
    for w in captures {
        for ((m, v), f) in mean.iter_mut().zip(w.samples()).zip(first) {
            *m += v - f;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = 0.0;
    for w in captures {
        var += w.samples().iter().zip(first).zip(&mean).map(|((v, f), m)| (v - f - m).powi(2)).sum::<f64>();
    }
    (var / ((n - 1) * len) as f64).sqrt()
}

/// Builds the reference model from a series of captures of the trusted bus.
///
/// The reference is the mean of every capture. Baseline scores compare it
/// against each disjoint batch of `n_average` captures, and the threshold
/// follows the configured policy.
pub fn calibrate(series: &MeasurementSeries, config: &CalibrationConfig) -> Result<ReferenceModel, DetectError> {
    config.validate()?;
    if series.len() < config.n_reference {
        return Err(DetectError::InsufficientCaptures {
            needed: config.n_reference,
            available: series.len(),
        });
    }
    let reference = average(series)?;
    let sigma = estimate_noise_sigma(series);
    let mut model = ReferenceModel {
        reference_waveform: reference,
        noise_sigma_estimate: sigma,
        n_captures: series.len(),
        baseline_scores: Vec::new(),
        method_baselines: MethodBaselines {
            mse_max: 0.0,
            xcorr_min: 1.0,
            rqcc_max: 0.0,
        },
        threshold: 0.0,
        policy: config.threshold_policy,
    };
    let density = model.difference_sigma(config.n_average).powi(2) * model.reference_waveform.dt();
    let batches = series.len() / config.n_average;
    for b in 0..batches {
        let batch = series.slice(b * config.n_average..(b + 1) * config.n_average);
        let (scores, _) = score_windows(&model.reference_waveform, &average(&batch)?, config, density)?;
        model.baseline_scores.push(scores.coherence_k);
        let mb = &mut model.method_baselines;
        mb.mse_max = mb.mse_max.max(scores.mse);
        if scores.xcorr.is_finite() {
            mb.xcorr_min = mb.xcorr_min.min(scores.xcorr);
        }
        if scores.rqcc.is_finite() {
            mb.rqcc_max = mb.rqcc_max.max(scores.rqcc);
        }
    }
    model.threshold = match config.threshold_policy {
        ThresholdPolicy::Fixed(v) => v,
        ThresholdPolicy::BaselineMaxPlus(m) => model.baseline_scores.iter().copied().fold(0.0, f64::max) + m,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{noisy_series, Waveform};

    fn base() -> Waveform {
        let s = (0..3000)
            .map(|i| {
                let t = i as f64;
                0.3 * (-((t - 600.0) / 30.0).powi(2)).exp() - 0.05 * (-((t - 1800.0) / 80.0).powi(2)).exp()
            })
            .collect();
        Waveform::new(2e-8, 5e-11, s).unwrap()
    }

    #[test]
    fn noise_free_series() {
        let series = noisy_series(&base(), 0.0, 1, 300).unwrap();
        let cfg = CalibrationConfig {
            threshold_policy: ThresholdPolicy::Fixed(0.0),
            ..CalibrationConfig::default()
        };
        let model = calibrate(&series, &cfg).unwrap();
        assert_eq!(model.noise_sigma_estimate, 0.0);
        assert_eq!(model.baseline_scores.len(), 10);
        assert!(model.baseline_scores.iter().all(|k| *k == 0.0));
        assert_eq!(model.threshold, 0.0);
    }

    #[test]
    fn sigma_estimate_and_threshold() {
        let series = noisy_series(&base(), 1e-3, 9, 300).unwrap();
        let model = calibrate(&series, &CalibrationConfig::default()).unwrap();
        assert!((model.noise_sigma_estimate - 1e-3).abs() < 1e-4);
        let max = model.baseline_scores.iter().copied().fold(0.0, f64::max);
        assert!(model.threshold >= max);
        assert!((model.threshold - max - 0.01).abs() < 1e-15);
    }

    #[test]
    fn too_few_captures() {
        let series = noisy_series(&base(), 1e-3, 9, 10).unwrap();
        let err = calibrate(&series, &CalibrationConfig::default()).unwrap_err();
        assert_eq!(
            err,
            DetectError::InsufficientCaptures {
                needed: 300,
                available: 10
            }
        );
    }
}
