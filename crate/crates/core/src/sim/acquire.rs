//! Noisy acquisition: per-capture Gaussian noise and series capture.

use super::{simulate_tdr, MeasurementSeries, PulseSpec, SimConfig, SimError, Waveform};
use crate::topology::Topology;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Seed for capture `index` of a series started from `base_seed`.
pub fn capture_seed(base_seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = base_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Adds zero-mean white Gaussian noise with standard deviation `sigma`.
pub fn add_noise(w: &Waveform, sigma: f64, seed: u64) -> Result<Waveform, SimError> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(SimError::InvalidConfig(format!("noise sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(w.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = w.samples().iter().map(|v| v + normal.sample(&mut rng)).collect();
    w.with_samples(samples)
}

/// `n` noisy copies of an already simulated capture.
pub fn noisy_series(base: &Waveform, sigma: f64, seed: u64, n: usize) -> Result<MeasurementSeries, SimError> {
    noisy_series_from(base, sigma, seed, 0..n)
}

/// Noisy copies of `base` for capture indices `indices`, so that a long
/// stream can be produced in pieces with the same seeds.
pub fn noisy_series_from(
    base: &Waveform,
    sigma: f64,
    seed: u64,
    indices: std::ops::Range<usize>,
) -> Result<MeasurementSeries, SimError> {
    let captures = indices
        .into_par_iter()
        .map(|i| add_noise(base, sigma, capture_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    MeasurementSeries::new(captures)
}

/// Simulates the network once and returns `n` captures with independent
/// noise of `config.noise_sigma`, seeded from `config.rng_seed`.
pub fn capture_series(
    topology: &Topology,
    pulse: &PulseSpec,
    config: &SimConfig,
    n: usize,
) -> Result<MeasurementSeries, SimError> {
    if n == 0 {
        return Err(SimError::InvalidConfig("capture count must be at least 1".into()));
    }
    let base = simulate_tdr(topology, pulse, config)?;
    noisy_series(&base, config.noise_sigma, config.rng_seed, n)
}
