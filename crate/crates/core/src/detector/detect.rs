use super::guard::{activity_guard, GuardVerdict};
use super::locate::{causal_smooth, locate_change};
use super::{CalibrationConfig, DetectError, DetectionReport, MethodScores, ReferenceModel};
use crate::analysis::{extended_coherence, extract_window, mse, rqcc, xcorr_score, AnalysisError};
use crate::sim::{average, MeasurementSeries, Waveform};
use rayon::prelude::*;

fn or_nan(r: Result<f64, AnalysisError>) -> Result<f64, AnalysisError> {
    match r {
        Err(AnalysisError::ZeroVariance | AnalysisError::ZeroNorm) => Ok(f64::NAN),
        other => other,
    }
}

/// Scores `actual` against `reference` with all four methods on the window
/// around their largest difference. `noise_density` is the white-noise
/// density expected in the difference; zero disables the coherence gate.
/// Returns the scores and the window origin.
pub fn score_windows(
    reference: &Waveform,
    actual: &Waveform,
    config: &CalibrationConfig,
    noise_density: f64,
) -> Result<(MethodScores, usize), DetectError> {
    if !reference.same_grid(actual) {
        return Err(mismatch(reference, actual));
    }
    let (window, mut params) = config.fitted(reference.len());
    params.noise_density = noise_density;
    let (r, a) = extract_window(reference, actual, window)?;
    let scores = MethodScores {
        mse: mse(&r, &a)?,
        xcorr: or_nan(xcorr_score(&r, &a))?,
        rqcc: or_nan(rqcc(&a, &r, config.sobolev_order))?,
        coherence_k: extended_coherence(&r, &a, &params)?.score_k,
    };
    Ok((scores, r.origin_index))
}

fn mismatch(reference: &Waveform, actual: &Waveform) -> DetectError {
    DetectError::SamplingMismatch(format!(
        "reference has {} samples at {:e} s from t0 {:e} s, capture has {} at {:e} s from {:e} s",
        reference.len(),
        reference.dt(),
        reference.t0(),
        actual.len(),
        actual.dt(),
        actual.t0()
    ))
}

/// Runs one detection on the newest `n_average` captures of `series`.
///
/// A batch with any capture flagged by the activity guard is reported as
/// contaminated and never raises the alarm. On an alarm the change is
/// localised on causally smoothed traces.
pub fn detect(
    model: &ReferenceModel,
    series: &MeasurementSeries,
    config: &CalibrationConfig,
) -> Result<DetectionReport, DetectError> {
    config.validate()?;
    let n = series.len();
    if n < config.n_average {
        return Err(DetectError::InsufficientCaptures {
            needed: config.n_average,
            available: n,
        });
    }
    let reference = &model.reference_waveform;
    let batch = series.slice(n - config.n_average..n);
    if let Some(w) = batch.captures().iter().find(|w| !reference.same_grid(w)) {
        return Err(mismatch(reference, w));
    }
    let level_gate = (config.guard.level_sigma * model.noise_sigma_estimate).max(config.guard.min_level_gate);
    let contaminated = batch.captures().iter().any(|w| {
        activity_guard(w, w.pre_trigger_len(), level_gate, &config.guard) == GuardVerdict::Contaminated
    });
    let actual = average(&batch)?;
    let sigma_d = model.difference_sigma(config.n_average);
    let (scores, window_origin) = score_windows(reference, &actual, config, sigma_d * sigma_d * reference.dt())?;
    let alien_present = scores.coherence_k > model.threshold && !contaminated;
    let located = if alien_present {
        let m = config.smoothing;
        locate_change(
            &causal_smooth(reference, m),
            &causal_smooth(&actual, m),
            config.velocity,
            sigma_d / (m as f64).sqrt(),
            config.k_sigma,
            config.hold,
        )?
    } else {
        None
    };
    Ok(DetectionReport {
        timestamp: n - 1,
        scores,
        threshold: model.threshold,
        alien_present,
        estimated_distance: located.map(|l| l.distance),
        onset_time: located.map(|l| l.onset_time),
        window_origin,
        contaminated,
    })
}

/// Detection over consecutive disjoint batches of `n_average` captures.
/// A trailing partial batch is ignored. Report timestamps index the last
/// capture of each batch within `series`.
pub fn detect_stream(
    model: &ReferenceModel,
    series: &MeasurementSeries,
    config: &CalibrationConfig,
) -> Result<Vec<DetectionReport>, DetectError> {
    config.validate()?;
    let batches = series.len() / config.n_average;
    if batches == 0 {
        return Err(DetectError::InsufficientCaptures {
            needed: config.n_average,
            available: series.len(),
        });
    }
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let end = (b + 1) * config.n_average;
            let mut report = detect(model, &series.slice(b * config.n_average..end), config)?;
            report.timestamp = end - 1;
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{calibrate, ThresholdPolicy};
    use crate::sim::{noisy_series, superimpose_can_traffic, Bit, CanOverlay};

    fn trace(echo: f64) -> Waveform {
        let s = (0..3000)
            .map(|i| {
                let t = i as f64;
                0.3 * (-((t - 600.0) / 30.0).powi(2)).exp() - 0.05 * (-((t - 1800.0) / 80.0).powi(2)).exp()
                    + echo * (-((t - 1200.0) / 40.0).powi(2)).exp() * (t > 1160.0) as u8 as f64
            })
            .collect();
        Waveform::new(2e-8, 5e-11, s).unwrap()
    }

    fn model(sigma: f64) -> ReferenceModel {
        calibrate(&noisy_series(&trace(0.0), sigma, 5, 300).unwrap(), &CalibrationConfig::default()).unwrap()
    }

    #[test]
    fn unchanged_noise_free_is_quiet() {
        let cfg = CalibrationConfig {
            threshold_policy: ThresholdPolicy::Fixed(0.0),
            ..CalibrationConfig::default()
        };
        let m = calibrate(&noisy_series(&trace(0.0), 0.0, 5, 300).unwrap(), &cfg).unwrap();
        let r = detect(&m, &noisy_series(&trace(0.0), 0.0, 6, 30).unwrap(), &cfg).unwrap();
        assert_eq!(r.scores.coherence_k, 0.0);
        assert!(!r.alien_present);
        assert_eq!(r.estimated_distance, None);
    }

    #[test]
    fn echo_is_detected_and_located() {
        let m = model(1e-3);
        let cfg = CalibrationConfig::default();
        let r = detect(&m, &noisy_series(&trace(0.05), 1e-3, 77, 30).unwrap(), &cfg).unwrap();
        assert!(r.alien_present, "K {} vs {}", r.scores.coherence_k, r.threshold);
        // the echo switches on at sample 1161
        let onset = r.onset_time.unwrap();
        assert!((onset - (1161.0 * 5e-11 - 2e-8)).abs() < 1.5e-11);
        assert_eq!(r.estimated_distance.unwrap(), 2e8 * onset / 2.0);
        assert_eq!(r.timestamp, 29);
    }

    #[test]
    fn contaminated_batch_never_alarms() {
        let m = model(1e-3);
        let cfg = CalibrationConfig::default();
        let overlay = CanOverlay {
            bitrate: 500e3,
            pattern: Bit::parse_pattern("0").unwrap(),
            dominant_level: 2.0,
            start_time: -1e-6,
        };
        let clean = noisy_series(&trace(0.05), 1e-3, 77, 30).unwrap();
        let mut caps = clean.into_captures();
        caps[7] = superimpose_can_traffic(&caps[7], &overlay).unwrap();
        let r = detect(&m, &MeasurementSeries::new(caps).unwrap(), &cfg).unwrap();
        assert!(r.contaminated);
        assert!(!r.alien_present);
        assert_eq!(r.estimated_distance, None);
    }

    #[test]
    fn stream_batches_and_errors() {
        let m = model(1e-3);
        let cfg = CalibrationConfig::default();
        let series = noisy_series(&trace(0.0), 1e-3, 8, 95).unwrap();
        let reports = detect_stream(&m, &series, &cfg).unwrap();
        assert_eq!(reports.iter().map(|r| r.timestamp).collect::<Vec<_>>(), vec![29, 59, 89]);
        let short = noisy_series(&trace(0.0), 1e-3, 8, 5).unwrap();
        assert!(matches!(detect(&m, &short, &cfg), Err(DetectError::InsufficientCaptures { .. })));
        let other = Waveform::new(2e-8, 1e-10, vec![0.0; 3000]).unwrap();
        let other = noisy_series(&other, 0.0, 1, 30).unwrap();
        assert!(matches!(detect(&m, &other, &cfg), Err(DetectError::SamplingMismatch(_))));
    }
}
