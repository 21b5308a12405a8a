use super::window::check_pair;
use super::{fft_plan, AnalysisError, SignalWindow};
use rustfft::num_complex::Complex64;

/// Mean squared error between two windows.
pub fn mse(a: &SignalWindow, b: &SignalWindow) -> Result<f64, AnalysisError> {
    check_pair(a, b)?;
    let sum: f64 = a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

fn centred(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

/// Normalised cross-correlation at the strongest lag in [−N/4, N/4].
///
/// Both windows are mean-removed and normalised by their full-window
/// energies, so the result lies in [−1, 1]. The returned value is the
/// signed coefficient at the lag with the largest magnitude: a scaled copy
/// gives 1, an inverted copy −1. Ties go to the smaller |lag|.
pub fn xcorr_score(a: &SignalWindow, b: &SignalWindow) -> Result<f64, AnalysisError> {
    check_pair(a, b)?;
    let (x, y) = (centred(&a.samples), centred(&b.samples));
    let ex: f64 = x.iter().map(|v| v * v).sum();
    let ey: f64 = y.iter().map(|v| v * v).sum();
    if ex == 0.0 || ey == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let norm = (ex * ey).sqrt();
    let n = x.len();
    // linear correlation through a zero-padded circular one
    let m = (2 * n).next_power_of_two();
    let padded = |v: &[f64]| -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = v.iter().map(|s| Complex64::new(*s, 0.0)).collect();
        buf.resize(m, Complex64::new(0.0, 0.0));
        buf
    };
    let (forward, inverse) = (fft_plan(m, true), fft_plan(m, false));
    let (mut fx, mut fy) = (padded(&x), padded(&y));
    forward.process(&mut fx);
    forward.process(&mut fy);
    let mut c: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    inverse.process(&mut c);
    let at = |lag: isize| c[lag.rem_euclid(m as isize) as usize].re / (m as f64 * norm);
    let mut best = at(0);
    for k in 1..=(n / 4) as isize {
        for lag in [k, -k] {
            let r = at(lag);
            if r.abs() > best.abs() {
                best = r;
            }
        }
    }
    Ok(best.clamp(-1.0, 1.0))
}

/// Squared Sobolev weights (1 + ω²)^s over the DFT bins of an `n`-point
/// signal, ω in radians per sample.
fn sobolev_weights(n: usize, order: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let w = 2.0 * std::f64::consts::PI * k / n as f64;
            (1.0 + w * w).powf(order)
        })
        .collect()
}

fn spectrum(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft_plan(buf.len(), true).process(&mut buf);
    buf
}

/// Discrete H^s norm: sqrt(Σ (1 + ω²)^s |F(ω)|² / N).
///
/// The 1/N factor makes the s = 0 case equal the time-domain L² norm.
pub fn sobolev_norm(x: &[f64], order: f64) -> f64 {
    weighted_norm(x, &sobolev_weights(x.len(), order))
}

fn weighted_norm(x: &[f64], weights: &[f64]) -> f64 {
    let sum: f64 = spectrum(x).iter().zip(weights).map(|(c, w)| w * c.norm_sqr()).sum();
    (sum / x.len() as f64).sqrt()
}

/// Relative Sobolev distance ‖a − b‖ / ‖b‖ in H^s. Zero for identical inputs.
pub fn rqcc(a: &SignalWindow, b: &SignalWindow, order: f64) -> Result<f64, AnalysisError> {
    check_pair(a, b)?;
    if !(order.is_finite() && order >= 0.0) {
        return Err(AnalysisError::InvalidParameter(format!(
            "Sobolev order must be non-negative, got {order}"
        )));
    }
    let weights = sobolev_weights(b.len(), order);
    let reference = weighted_norm(&b.samples, &weights);
    if reference == 0.0 {
        return Err(AnalysisError::ZeroNorm);
    }
    let diff: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect();
    Ok(weighted_norm(&diff, &weights) / reference)
}
