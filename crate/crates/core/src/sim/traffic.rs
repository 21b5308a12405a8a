//! Overlay of CAN bus traffic on a capture.

use super::{SimError, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bit {
    Dominant,
    Recessive,
}

impl Bit {
    /// CAN convention: logical 0 is dominant, 1 is recessive.
    pub fn parse_pattern(text: &str) -> Result<Vec<Bit>, SimError> {
        text.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' | 'd' | 'D' => Ok(Bit::Dominant),
                '1' | 'r' | 'R' => Ok(Bit::Recessive),
                other => Err(SimError::InvalidConfig(format!("invalid bit '{other}' in pattern"))),
            })
            .collect()
    }
}

/// A differential bit stream present on the bus while a capture is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct CanOverlay {
    pub bitrate: f64,
    pub pattern: Vec<Bit>,
    /// Differential voltage during dominant bits; recessive bits add nothing.
    pub dominant_level: f64,
    /// Time of the first bit edge relative to the capture start (may be negative).
    pub start_time: f64,
}

impl CanOverlay {
    pub fn bit_time(&self) -> f64 {
        1.0 / self.bitrate
    }

    /// Overlay voltage at capture time `t`. The bus is recessive outside the pattern.
    pub fn level_at(&self, t: f64) -> f64 {
        // nudge so that sample times computed as i·dt land on the bit they name
        let rel = (t - self.start_time) * self.bitrate + 1e-9;
        if rel < 0.0 {
            return 0.0;
        }
        match self.pattern.get(rel.floor() as usize) {
            Some(Bit::Dominant) => self.dominant_level,
            _ => 0.0,
        }
    }
}

/// Adds a piecewise-constant bit stream to the capture.
pub fn superimpose_can_traffic(w: &Waveform, overlay: &CanOverlay) -> Result<Waveform, SimError> {
    if !(overlay.bitrate.is_finite() && overlay.bitrate > 0.0) {
        return Err(SimError::InvalidConfig(format!(
            "bitrate must be positive, got {}",
            overlay.bitrate
        )));
    }
    let samples = w
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| v + overlay.level_at(w.time(i)))
        .collect();
    w.with_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Waveform {
        // 8 µs at 100 ns resolution
        Waveform::new(0.0, 100e-9, (0..80).map(|i| (i as f64 * 0.1).sin()).collect()).unwrap()
    }

    fn overlay(pattern: &str) -> CanOverlay {
        CanOverlay {
            bitrate: 500e3,
            pattern: Bit::parse_pattern(pattern).unwrap(),
            dominant_level: 2.0,
            start_time: 0.0,
        }
    }

    #[test]
    fn all_recessive_is_identity() {
        let w = base();
        assert_eq!(superimpose_can_traffic(&w, &overlay("1111")).unwrap(), w);
    }

    #[test]
    fn all_dominant_is_uniform_offset() {
        let w = base();
        let out = superimpose_can_traffic(&w, &overlay("0000")).unwrap();
        for (a, b) in out.samples().iter().zip(w.samples()) {
            assert!((a - b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alternating_pattern_gives_two_microsecond_plateaus() {
        let w = Waveform::new(0.0, 100e-9, vec![0.0; 60]).unwrap();
        // CAN "101" = recessive, dominant, recessive
        let out = superimpose_can_traffic(&w, &overlay("101")).unwrap();
        let s = out.samples();
        assert!(s[..20].iter().all(|v| *v == 0.0));
        assert!(s[20..40].iter().all(|v| *v == 2.0));
        assert!(s[40..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_pattern_and_bitrate() {
        assert!(Bit::parse_pattern("10x").is_err());
        let mut o = overlay("0");
        o.bitrate = 0.0;
        assert!(superimpose_can_traffic(&base(), &o).is_err());
    }
}
