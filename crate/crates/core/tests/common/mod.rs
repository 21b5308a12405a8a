#![allow(dead_code)]

use tdrguard::detector::{calibrate, detect_stream, CalibrationConfig, DetectionReport, ReferenceModel};
use tdrguard::sim::{
    bounce_arrivals, bounce_oracle, noisy_series_from, simulate_tdr, PulseSpec, SimConfig, Waveform,
};
use tdrguard::topology::{parse_topology, NodeLoad, Topology};

pub const POWERTRAIN: &str = include_str!("../data/powertrain.topo");
pub const TWO_TRANSCEIVERS: &str = include_str!("../data/two_transceivers.topo");

pub const ECUS: [&str; 7] = ["EKP", "Light", "SZL_LWS", "DSC", "ARS", "Engine", "DME"];
pub const ALIEN_POSITION: f64 = 9.86;
pub const ALIEN_STUB: f64 = 0.1;

pub fn powertrain() -> Topology {
    parse_topology(POWERTRAIN).unwrap()
}

pub fn with_alien(topology: &Topology) -> Topology {
    topology
        .attach_device(ALIEN_POSITION, ALIEN_STUB, NodeLoad::transceiver(), "alien")
        .unwrap()
}

/// 10 m bus terminated at both ends, optionally with one transceiver stub.
pub fn matched_bus(stub: Option<(f64, f64)>) -> Topology {
    let mut text = String::from("line z0=120 v=2e8\nbus length=10\nterm pos=0 r=120\nterm pos=end r=120\nmeas pos=0\n");
    if let Some((pos, len)) = stub {
        text.push_str(&format!("node label=X pos={pos} stub={len}\n"));
    }
    parse_topology(&text).unwrap()
}

pub struct OracleComparison {
    pub nmse: f64,
    /// First echo onset after injection, seconds.
    pub onset: f64,
    pub dt: f64,
}

/// Time after injection where `with` first departs from the stub-free 10 m
/// bus by 1 % of the largest departure, interpolated between samples.
fn echo_onset(pulse: &PulseSpec, config: &SimConfig, with: &Waveform) -> f64 {
    let bare = simulate_tdr(&matched_bus(None), pulse, config).unwrap();
    let diff: Vec<f64> = with.samples().iter().zip(bare.samples()).map(|(a, b)| (a - b).abs()).collect();
    let level = 0.01 * diff.iter().fold(0.0f64, |m, v| m.max(*v));
    let i = diff.iter().position(|v| *v >= level).unwrap();
    let frac = if i == 0 { 0.0 } else { (level - diff[i - 1]) / (diff[i] - diff[i - 1]) };
    with.time(i) - with.t0() - (1.0 - frac) * with.dt()
}

/// FDTD against the ray-traced solution over the first three distinct echo
/// arrivals of a single-stub bus.
pub fn compare_with_oracle(topology: &Topology, spatial_step: f64) -> OracleComparison {
    let pulse = PulseSpec::for_topology(topology);
    let config = SimConfig::with_spatial_step(topology, &pulse, spatial_step);
    let fdtd = simulate_tdr(topology, &pulse, &config).unwrap();
    let oracle = bounce_oracle(topology, &pulse, 30, config.time_step, fdtd.len()).unwrap();

    let mut arrivals: Vec<f64> = bounce_arrivals(topology, &pulse, 30)
        .unwrap()
        .iter()
        .filter(|a| a.order > 0)
        .map(|a| a.delay)
        .collect();
    arrivals.dedup_by(|a, b| (*a - *b).abs() < 0.5 * config.time_step);
    let start = arrivals[0];
    let end = arrivals[2.min(arrivals.len() - 1)] + pulse.active_duration() + 2e-9;
    let index = |t: f64| ((pulse.delay + t) / config.time_step).round() as usize;
    let (lo, hi) = (index(start), index(end).min(fdtd.len() - 1));
    let (mut err, mut norm) = (0.0, 0.0);
    for i in lo..=hi {
        let d = fdtd.samples()[i] - oracle.samples()[i];
        err += d * d;
        norm += oracle.samples()[i] * oracle.samples()[i];
    }
    OracleComparison {
        nmse: err / norm,
        onset: echo_onset(&pulse, &config, &fdtd),
        dt: config.time_step,
    }
}

/// Largest |v| on the port of a stub-free matched bus once the pulse has
/// left, relative to the pulse amplitude.
pub fn matched_line_residual() -> f64 {
    let topology = matched_bus(None);
    let pulse = PulseSpec::for_topology(&topology);
    let config = SimConfig::for_topology(&topology, &pulse);
    let w = simulate_tdr(&topology, &pulse, &config).unwrap();
    let end = pulse.delay + pulse.active_duration();
    let worst = (0..w.len())
        .filter(|&i| w.time(i) >= end)
        .map(|i| w.samples()[i].abs())
        .fold(0.0, f64::max);
    worst / pulse.amplitude.abs()
}

/// Noise-free captures of the reference bus and the bus with the alien
/// attached, on the same grid.
pub struct AttackScene {
    pub clean: Waveform,
    pub attacked: Waveform,
    pub config: CalibrationConfig,
    pub sigma: f64,
}

impl AttackScene {
    pub fn new(sigma: f64) -> Self {
        let topology = powertrain();
        let pulse = PulseSpec::for_topology(&topology);
        let sim = SimConfig::for_topology(&topology, &pulse);
        Self {
            clean: simulate_tdr(&topology, &pulse, &sim).unwrap(),
            attacked: simulate_tdr(&with_alien(&topology), &pulse, &sim).unwrap(),
            config: CalibrationConfig {
                velocity: topology.propagation_velocity(),
                ..CalibrationConfig::default()
            },
            sigma,
        }
    }

    /// Calibrates on captures `0..n_reference` of the seeded stream.
    pub fn calibrate(&self, seed: u64) -> ReferenceModel {
        let reference = noisy_series_from(&self.clean, self.sigma, seed, 0..self.config.n_reference).unwrap();
        calibrate(&reference, &self.config).unwrap()
    }

    /// Runs `batches` detection batches after calibration. Captures from
    /// `attach_at` on (counted within the stream) see the alien.
    pub fn run(&self, model: &ReferenceModel, seed: u64, batches: usize, attach_at: Option<usize>) -> Vec<DetectionReport> {
        let first = self.config.n_reference;
        let total = batches * self.config.n_average;
        let switch = first + attach_at.unwrap_or(total).min(total);
        let end = first + total;
        let stream = match (switch > first, switch < end) {
            (true, true) => noisy_series_from(&self.clean, self.sigma, seed, first..switch)
                .unwrap()
                .concat(&noisy_series_from(&self.attacked, self.sigma, seed, switch..end).unwrap())
                .unwrap(),
            (true, false) => noisy_series_from(&self.clean, self.sigma, seed, first..end).unwrap(),
            _ => noisy_series_from(&self.attacked, self.sigma, seed, first..end).unwrap(),
        };
        detect_stream(model, &stream, &self.config).unwrap()
    }
}

/// Welch magnitude-squared coherence by direct DFT: periodic Hann taper,
/// hop of `segment - floor(overlap * segment)`, no detrending.
pub fn direct_dft_coherence(x: &[f64], y: &[f64], segment: usize, overlap: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let n = segment;
    let hop = n - (overlap * n as f64).floor() as usize;
    let taper: Vec<f64> = (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect();
    let bins = n / 2 + 1;
    let (mut sxx, mut syy, mut sxy_re, mut sxy_im) = (vec![0.0; bins], vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]);
    let mut start = 0;
    while start + n <= x.len() {
        for k in 0..bins {
            let (mut xr, mut xi, mut yr, mut yi) = (0.0, 0.0, 0.0, 0.0);
            for t in 0..n {
                let angle = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                let (s, c) = angle.sin_cos();
                let (a, b) = (x[start + t] * taper[t], y[start + t] * taper[t]);
                xr += a * c;
                xi += a * s;
                yr += b * c;
                yi += b * s;
            }
            sxx[k] += xr * xr + xi * xi;
            syy[k] += yr * yr + yi * yi;
            // conj(X) * Y
            sxy_re[k] += xr * yr + xi * yi;
            sxy_im[k] += xr * yi - xi * yr;
        }
        start += hop;
    }
    (0..bins)
        .map(|k| (sxy_re[k] * sxy_re[k] + sxy_im[k] * sxy_im[k]) / (sxx[k] * syy[k]))
        .collect()
}
