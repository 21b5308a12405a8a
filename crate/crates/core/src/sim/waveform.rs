use super::SimError;

/// A uniformly sampled voltage trace at the measurement port.
///
/// Sample `i` is taken at time `i * dt` after the capture starts; `t0` is the
/// pulse injection instant on the same time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    t0: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>) -> Result<Self, SimError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidWaveform(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(SimError::InvalidWaveform("t0 must be finite".into()));
        }
        if samples.is_empty() {
            return Err(SimError::InvalidWaveform("no samples".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SimError::InvalidWaveform(format!("sample {i} is not finite")));
        }
        Ok(Self { t0, dt, samples })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    /// Number of samples strictly before the injection instant.
    pub fn pre_trigger_len(&self) -> usize {
        let n = (self.t0 / self.dt).ceil().max(0.0) as usize;
        // guard against t0 landing a hair above a grid point
        let n = if n > 0 && self.time(n - 1) >= self.t0 { n - 1 } else { n };
        n.min(self.samples.len())
    }

    /// Same time axis, new sample values.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self, SimError> {
        if samples.len() != self.samples.len() {
            return Err(SimError::MismatchedSeries(format!(
                "expected {} samples, got {}",
                self.samples.len(),
                samples.len()
            )));
        }
        Self::new(self.t0, self.dt, samples)
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            samples: self.samples.iter().map(|v| v * gain).collect(),
        }
    }

    /// True when `other` shares t0, dt and length with `self`.
    pub fn same_grid(&self, other: &Waveform) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
        self.samples.len() == other.samples.len()
            && close(self.dt, other.dt)
            && (self.t0 - other.t0).abs() <= 1e-6 * self.dt
    }
}

/// A batch of repeated captures on one shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    captures: Vec<Waveform>,
}

impl MeasurementSeries {
    pub fn new(captures: Vec<Waveform>) -> Result<Self, SimError> {
        if let Some(first) = captures.first() {
            if let Some(i) = captures.iter().position(|w| !first.same_grid(w)) {
                return Err(SimError::MismatchedSeries(format!(
                    "capture {i} does not share the time grid of capture 0"
                )));
            }
        }
        Ok(Self { captures })
    }

    pub fn captures(&self) -> &[Waveform] {
        &self.captures
    }

    pub fn len(&self) -> usize {
        self.captures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captures.is_empty()
    }

    pub fn into_captures(self) -> Vec<Waveform> {
        self.captures
    }

    /// Sub-series of captures `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            captures: self.captures[range].to_vec(),
        }
    }

    /// Appends the captures of `other`; both must share a grid.
    pub fn concat(&self, other: &MeasurementSeries) -> Result<Self, SimError> {
        let mut captures = self.captures.clone();
        captures.extend(other.captures.iter().cloned());
        Self::new(captures)
    }
}

/// Pointwise arithmetic mean of a series.
pub fn average(series: &MeasurementSeries) -> Result<Waveform, SimError> {
    let captures = series.captures();
    let first = captures.first().ok_or(SimError::EmptySeries)?;
    let mut acc = vec![0.0; first.len()];
    for w in captures {
        for (a, v) in acc.iter_mut().zip(w.samples()) {
            *a += v;
        }
    }
    let n = captures.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(Waveform {
        t0: first.t0,
        dt: first.dt,
        samples: acc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(samples: Vec<f64>) -> Waveform {
        Waveform::new(2e-9, 1e-9, samples).unwrap()
    }

    #[test]
    fn rejects_bad_waveforms() {
        assert!(Waveform::new(0.0, 0.0, vec![1.0]).is_err());
        assert!(Waveform::new(0.0, 1.0, vec![]).is_err());
        assert!(Waveform::new(0.0, 1.0, vec![f64::NAN]).is_err());
    }

    #[test]
    fn pre_trigger_counts_samples_before_t0() {
        assert_eq!(w(vec![0.0; 5]).pre_trigger_len(), 2);
        let x = Waveform::new(2.5e-9, 1e-9, vec![0.0; 5]).unwrap();
        assert_eq!(x.pre_trigger_len(), 3);
        let y = Waveform::new(0.0, 1e-9, vec![0.0; 5]).unwrap();
        assert_eq!(y.pre_trigger_len(), 0);
    }

    #[test]
    fn average_identical_and_opposite() {
        let a = w(vec![1.0, -2.0, 3.0]);
        let s = MeasurementSeries::new(vec![a.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(average(&s).unwrap(), a);
        let s = MeasurementSeries::new(vec![a.clone(), a.scaled(-1.0)]).unwrap();
        assert!(average(&s).unwrap().samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn average_of_empty_series_fails() {
        let s = MeasurementSeries::new(vec![]).unwrap();
        assert_eq!(average(&s), Err(SimError::EmptySeries));
    }

    #[test]
    fn series_rejects_mixed_grids() {
        let a = w(vec![0.0; 3]);
        let b = Waveform::new(2e-9, 2e-9, vec![0.0; 3]).unwrap();
        assert!(MeasurementSeries::new(vec![a.clone(), b]).is_err());
        assert!(MeasurementSeries::new(vec![a, w(vec![0.0; 4])]).is_err());
    }
}
