use super::window::check_pair;
use super::{fft_plan, AnalysisError, SignalWindow};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taper {
    /// Periodic Hann window.
    Hann,
    Rectangular,
}

impl Taper {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Taper::Rectangular => vec![1.0; n],
            Taper::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchParams {
    pub segment_len: usize,
    /// Fraction of a segment shared with the next one, in [0, 1).
    pub overlap: f64,
    pub taper: Taper,
}

impl Default for WelchParams {
    fn default() -> Self {
        Self {
            segment_len: 64,
            overlap: 0.5,
            taper: Taper::Hann,
        }
    }
}

impl WelchParams {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.segment_len < 2 {
            return Err(AnalysisError::InvalidParameter(format!(
                "segment length must be at least 2, got {}",
                self.segment_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(AnalysisError::InvalidParameter(format!(
                "overlap must lie in [0, 1), got {}",
                self.overlap
            )));
        }
        Ok(())
    }

    /// Hop between segment starts.
    pub fn step(&self) -> usize {
        let shared = (self.overlap * self.segment_len as f64).floor() as usize;
        (self.segment_len - shared).max(1)
    }

    /// Number of whole segments that fit `len` samples.
    pub fn segments(&self, len: usize) -> usize {
        if len < self.segment_len {
            0
        } else {
            (len - self.segment_len) / self.step() + 1
        }
    }
}

/// One-sided spectrum on the bins 0..=N/2 of a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.re).collect()
    }
}

/// Segment-averaged densities (Pxx, Pyy, Pxy) in V²/Hz.
///
/// Segments are tapered but not detrended. The cross term is conj(X)·Y, so
/// its phase is the phase of y relative to x. Interior bins are doubled to
/// give one-sided densities.
pub fn welch_spectra(
    x: &SignalWindow,
    y: &SignalWindow,
    params: &WelchParams,
) -> Result<(Spectrum, Spectrum, Spectrum), AnalysisError> {
    check_pair(x, y)?;
    params.validate()?;
    let n = params.segment_len;
    let segments = params.segments(x.len());
    if segments < 2 {
        return Err(AnalysisError::TooFewSegments {
            segments,
            len: x.len(),
        });
    }
    let taper = params.taper.coefficients(n);
    let energy: f64 = taper.iter().map(|w| w * w).sum();
    let bins = n / 2 + 1;
    let fft = fft_plan(n, true);

    let mut sxx = vec![0.0; bins];
    let mut syy = vec![0.0; bins];
    let mut sxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut bx = vec![Complex64::new(0.0, 0.0); n];
    let mut by = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..segments {
        let start = s * params.step();
        for i in 0..n {
            bx[i] = Complex64::new(x.samples[start + i] * taper[i], 0.0);
            by[i] = Complex64::new(y.samples[start + i] * taper[i], 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..bins {
            sxx[k] += bx[k].norm_sqr();
            syy[k] += by[k].norm_sqr();
            sxy[k] += bx[k].conj() * by[k];
        }
    }

    let dt = x.dt;
    let frequencies: Vec<f64> = (0..bins).map(|k| k as f64 / (n as f64 * dt)).collect();
    let scale = |k: usize| {
        let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        one_sided * dt / (energy * segments as f64)
    };
    let real = |s: Vec<f64>| Spectrum {
        frequencies: frequencies.clone(),
        values: s
            .into_iter()
            .enumerate()
            .map(|(k, v)| Complex64::new(v * scale(k), 0.0))
            .collect(),
    };
    let pxy = Spectrum {
        frequencies: frequencies.clone(),
        values: sxy.into_iter().enumerate().map(|(k, v)| v * scale(k)).collect(),
    };
    Ok((real(sxx), real(syy), pxy))
}

fn check_grid(a: &Spectrum, b: &Spectrum) -> Result<(), AnalysisError> {
    if a.len() != b.len() || a.frequencies != b.frequencies {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(())
}

/// Magnitude-squared coherence |Pxy|² / (Pxx·Pyy), clamped to [0, 1].
///
/// Bins whose denominator falls below 1e-12 · max(Pxx) · max(Pyy) carry no
/// usable power and are reported as fully coherent.
pub fn coherence(pxx: &Spectrum, pyy: &Spectrum, pxy: &Spectrum) -> Result<Vec<f64>, AnalysisError> {
    check_grid(pxx, pyy)?;
    check_grid(pxx, pxy)?;
    let max_x = pxx.values.iter().fold(0.0f64, |m, c| m.max(c.re));
    let max_y = pyy.values.iter().fold(0.0f64, |m, c| m.max(c.re));
    let eps = 1e-12 * max_x * max_y;
    Ok((0..pxx.len())
        .map(|k| {
            let denom = pxx.values[k].re * pyy.values[k].re;
            if denom <= eps {
                1.0
            } else {
                (pxy.values[k].norm_sqr() / denom).clamp(0.0, 1.0)
            }
        })
        .collect())
}

/// [`coherence`] restricted to bins where the two inputs measurably differ.
///
/// `pdd` is the density of the difference y − x. Bins where it stays below
/// `floor` are reported as fully coherent. `floor` is a two-sided density in
/// V²/Hz and is doubled above DC like the spectra, so `κ·s²·dt` for white
/// noise of variance s² can be passed directly. The undoubled Nyquist bin is
/// gated slightly more eagerly.
pub fn gated_coherence(
    pxx: &Spectrum,
    pyy: &Spectrum,
    pxy: &Spectrum,
    pdd: &Spectrum,
    floor: f64,
) -> Result<Vec<f64>, AnalysisError> {
    check_grid(pxx, pdd)?;
    let mut c = coherence(pxx, pyy, pxy)?;
    for (k, (c, d)) in c.iter_mut().zip(&pdd.values).enumerate() {
        let f = if k == 0 { floor } else { 2.0 * floor };
        if d.re < f {
            *c = 1.0;
        }
    }
    Ok(c)
}
