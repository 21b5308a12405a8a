mod common;

use common::AttackScene;
use proptest::prelude::*;
use rayon::prelude::*;
use tdrguard::detector::{calibrate, detect, locate_change, CalibrationConfig};
use tdrguard::sim::{noisy_series, noisy_series_from, MeasurementSeries, Waveform};

fn repeated(w: &Waveform, n: usize) -> MeasurementSeries {
    MeasurementSeries::new(vec![w.clone(); n]).unwrap()
}

#[test]
fn unchanged_noise_free_bus_never_alarms() {
    let scene = AttackScene::new(0.0);
    let model = scene.calibrate(1);
    assert!(model.baseline_scores.iter().all(|k| *k == 0.0));
    for report in scene.run(&model, 1, 3, None) {
        assert!(!report.alien_present);
        assert_eq!(report.scores.coherence_k, 0.0);
    }
}

#[test]
fn detect_leaves_model_untouched() {
    let scene = AttackScene::new(0.01);
    let model = scene.calibrate(4);
    let before = model.clone();
    let reports = scene.run(&model, 4, 2, Some(0));
    assert!(reports.iter().all(|r| r.alien_present));
    assert_eq!(model, before);
}

/// False alarms over `trials` seeded single-batch runs on the unchanged bus.
fn false_alarms(scene: &AttackScene, n_average: usize, trials: u64) -> usize {
    let config = CalibrationConfig {
        n_average,
        ..scene.config.clone()
    };
    (0..trials)
        .into_par_iter()
        .filter(|&seed| {
            let reference = noisy_series(&scene.clean, scene.sigma, seed, config.n_reference).unwrap();
            let model = calibrate(&reference, &config).unwrap();
            let first = config.n_reference;
            let batch = noisy_series_from(&scene.clean, scene.sigma, seed, first..first + n_average).unwrap();
            detect(&model, &batch, &config).unwrap().alien_present
        })
        .count()
}

#[test]
fn averaging_does_not_raise_false_alarms() {
    let scene = AttackScene::new(0.03);
    let single = false_alarms(&scene, 1, 200);
    let averaged = false_alarms(&scene, 30, 200);
    assert!(averaged <= single, "{averaged} with averaging, {single} without");
}

/// A smooth reference trace of `n` samples with t0 at sample 40.
fn trace(n: usize, seed: u64) -> Waveform {
    let f = 0.01 + (seed % 7) as f64 * 0.003;
    let s = (0..n).map(|i| (i as f64 * f).sin() + 0.3 * (i as f64 * 0.37 * f).cos()).collect();
    Waveform::new(40.0 * 5e-11, 5e-11, s).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn onset_of_synthetic_change_is_exact(onset in 41usize..1900, amp in 1e-3f64..1.0, seed in 0u64..100, hold in 1usize..8) {
        let r = trace(2000, seed);
        let mut s = r.samples().to_vec();
        for (k, v) in s[onset..].iter_mut().enumerate() {
            *v += amp * (-(k as f64) / 200.0).exp();
        }
        let a = r.with_samples(s).unwrap();
        let v = 2e8;
        let loc = locate_change(&r, &a, v, 0.0, 5.0, hold).unwrap().unwrap();
        let expected = v * (r.time(onset) - r.t0()) / 2.0;
        prop_assert!((loc.distance - expected).abs() <= v * r.dt() / 2.0 + 1e-12, "{} vs {}", loc.distance, expected);
    }

    #[test]
    fn verdict_survives_common_gain(gain in 0.1f64..10.0, attacked in any::<bool>()) {
        let scene = AttackScene::new(0.0);
        let config = CalibrationConfig { n_reference: 30, ..scene.config.clone() };
        let actual = if attacked { &scene.attacked } else { &scene.clean };
        let verdict = |g: f64| {
            let model = calibrate(&repeated(&scene.clean.scaled(g), 30), &config).unwrap();
            let report = detect(&model, &repeated(&actual.scaled(g), 30), &config).unwrap();
            (report.alien_present, report.scores.coherence_k == 0.0)
        };
        let base = verdict(1.0);
        prop_assert_eq!(base, (attacked, !attacked));
        prop_assert_eq!(verdict(gain), base);
    }
}
