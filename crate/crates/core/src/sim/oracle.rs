//! Ray-traced (bounce diagram) reference solution for small networks.
//!
//! Every line is treated as an ideal delay with its own characteristic
//! impedance. A wave of amplitude `a` arriving on line `i` at a junction
//! sees the parallel admittance `Y(s) = G + sC` of every other line, load and
//! source resistor there, and scatters into
//!
//! ```text
//! reflected   Γ(s) · a,  Γ = (1 - Z_i Y) / (1 + Z_i Y)
//! transmitted T(s) · a,  T = 2 / (1 + Z_i Y)     (into every other line)
//! ```
//!
//! With purely resistive loads Γ and T are constants. A parallel RC load
//! makes them first-order rational functions of `s`; those are applied to the
//! ray waveform in the time domain, exactly for piecewise-linear input.
//!
//! This module shares no code with the FDTD solver beyond the topology and
//! pulse types.

use super::{PulseSpec, SimError, Waveform};
use crate::topology::Topology;
use std::collections::HashMap;

/// Oversampling of the internal time grid relative to the output grid.
const OVERSAMPLE: usize = 8;
/// Rays whose static gain falls below this fraction of the pulse amplitude are dropped.
const GAIN_CUTOFF: f64 = 1e-9;

/// First-order section H(s) = (n0 + n1 s) / (d0 + d1 s) with d1 > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    n0: f64,
    n1: f64,
    d0: f64,
    d1: f64,
}

impl Section {
    fn key(&self) -> [u64; 4] {
        [self.n0.to_bits(), self.n1.to_bits(), self.d0.to_bits(), self.d1.to_bits()]
    }

    /// Filters `x`, sampled every `h`, treating it as piecewise linear.
    fn apply(&self, x: &[f64], h: f64) -> Vec<f64> {
        // H = k + g / (s + p)
        let k = self.n1 / self.d1;
        let p = self.d0 / self.d1;
        let g = (self.n0 - k * self.d0) / self.d1;
        let decay = (-p * h).exp();
        let a = -(-p * h).exp_m1() / p;
        let b = (h / p - a / p) / h;
        let mut state = 0.0;
        let mut out = Vec::with_capacity(x.len());
        out.push(k * x[0]);
        for w in x.windows(2) {
            state = decay * state + w[0] * a + (w[1] - w[0]) * b;
            out.push(k * w[1] + g * state);
        }
        out
    }
}

/// Scattering factor: either a constant or a first-order section.
#[derive(Debug, Clone, Copy)]
enum Factor {
    Constant(f64),
    Dynamic(Section),
}

/// `num / (den0 + den1 s)`, folded to a constant when `den1` vanishes.
fn ratio(n0: f64, n1: f64, d0: f64, d1: f64) -> Factor {
    if d1 == 0.0 {
        Factor::Constant(n0 / d0)
    } else {
        Factor::Dynamic(Section { n0, n1, d0, d1 })
    }
}

#[derive(Debug, Clone)]
struct Line {
    a: usize,
    b: usize,
    impedance: f64,
    delay: f64,
}

#[derive(Debug, Clone, Default)]
struct Junction {
    conductance: f64,
    capacitance: f64,
    /// `Some(g)` for a Thevenin source with conductance `g`; infinite for an ideal source.
    source: Option<f64>,
}

struct Network {
    lines: Vec<Line>,
    junctions: Vec<Junction>,
    port: usize,
}

impl Network {
    fn build(topology: &Topology, pulse: &PulseSpec) -> Result<Self, SimError> {
        if topology.stubs().len() > 2 {
            return Err(SimError::OracleScope(format!(
                "at most 2 stubs supported, topology has {}",
                topology.stubs().len()
            )));
        }
        let total = topology.total_length();
        let tol = 1e-9 * total.max(1.0);
        let mut points: Vec<f64> = vec![0.0, total];
        let mut acc = 0.0;
        for seg in topology.segments() {
            acc += seg.length;
            points.push(acc.min(total));
        }
        for stub in topology.stubs() {
            points.push(stub.position);
        }
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let find = |x: f64| points.iter().position(|p| (p - x).abs() <= tol).unwrap();

        let mut junctions = vec![Junction::default(); points.len()];
        let mut lines = Vec::new();
        for (i, w) in points.windows(2).enumerate() {
            let p = topology.params_at(0.5 * (w[0] + w[1]));
            lines.push(Line {
                a: i,
                b: i + 1,
                impedance: p.impedance(),
                delay: (w[1] - w[0]) / p.velocity(),
            });
        }
        let load = |j: &mut Junction, r: f64, c: f64| {
            if r.is_finite() {
                j.conductance += 1.0 / r;
            }
            j.capacitance += c;
        };
        let (first, last) = (find(0.0), find(total));
        let ends = topology.end_loads();
        load(&mut junctions[first], ends[0].resistance, ends[0].capacitance);
        load(&mut junctions[last], ends[1].resistance, ends[1].capacitance);
        for stub in topology.stubs() {
            let at = find(stub.position);
            if stub.length == 0.0 {
                load(&mut junctions[at], stub.load.resistance, stub.load.capacitance);
            } else {
                junctions.push(Junction::default());
                let tip = junctions.len() - 1;
                load(&mut junctions[tip], stub.load.resistance, stub.load.capacitance);
                lines.push(Line {
                    a: at,
                    b: tip,
                    impedance: stub.params.impedance(),
                    delay: stub.length / stub.params.velocity(),
                });
            }
        }
        let port = find(topology.measurement_position());
        junctions[port].source = Some(if pulse.source_impedance == 0.0 {
            f64::INFINITY
        } else {
            1.0 / pulse.source_impedance
        });
        Ok(Self { lines, junctions, port })
    }

    fn lines_at(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.a == node || l.b == node)
            .map(|(i, _)| i)
    }

    /// Conductance and capacitance seen at `node` excluding line `skip`.
    fn admittance(&self, node: usize, skip: Option<usize>) -> (f64, f64) {
        let j = &self.junctions[node];
        let lines: f64 = self
            .lines_at(node)
            .filter(|i| Some(*i) != skip)
            .map(|i| 1.0 / self.lines[i].impedance)
            .sum();
        (lines + j.conductance + j.source.unwrap_or(0.0), j.capacitance)
    }

    /// (reflection, transmission) for a wave arriving on `line` at `node`.
    fn scattering(&self, node: usize, line: usize) -> (Factor, Factor) {
        let (g, c) = self.admittance(node, Some(line));
        if g.is_infinite() {
            return (Factor::Constant(-1.0), Factor::Constant(0.0));
        }
        let z = self.lines[line].impedance;
        let d0 = 1.0 + z * g;
        let d1 = z * c;
        (ratio(1.0 - z * g, -z * c, d0, d1), ratio(2.0, 0.0, d0, d1))
    }

    /// Voltage divider from the open-circuit source to the port node.
    fn launch(&self) -> Factor {
        let gs = self.junctions[self.port].source.unwrap_or(0.0);
        if gs.is_infinite() {
            return Factor::Constant(1.0);
        }
        let (g, c) = self.admittance(self.port, None);
        let g_rest = g - gs;
        // V = Vs · gs / (gs + g_rest + s c)
        ratio(gs, 0.0, gs + g_rest, c)
    }
}

/// One contribution to the port voltage.
#[derive(Debug, Clone)]
pub struct Arrival {
    /// Arrival time relative to injection.
    pub delay: f64,
    /// Static (DC) gain from the open-circuit source voltage.
    pub gain: f64,
    /// Number of scattering events along the path.
    pub order: usize,
    constant: f64,
    sections: Vec<Section>,
}

impl Arrival {
    /// True when the path includes frequency-dependent scattering.
    pub fn is_dynamic(&self) -> bool {
        !self.sections.is_empty()
    }
}

fn push_factor(gain: &mut f64, sections: &mut Vec<Section>, f: Factor) {
    match f {
        Factor::Constant(k) => *gain *= k,
        Factor::Dynamic(s) => sections.push(s),
    }
}

fn dc_gain(gain: f64, sections: &[Section]) -> f64 {
    sections.iter().fold(gain, |g, s| g * s.n0 / s.d0)
}

/// Enumerates every ray reaching the port after at most `max_order`
/// scattering events. The incident pulse itself is the order-0 arrival; the
/// pick-up at the port is not counted as an event.
pub fn bounce_arrivals(topology: &Topology, pulse: &PulseSpec, max_order: usize) -> Result<Vec<Arrival>, SimError> {
    pulse.validate()?;
    let net = Network::build(topology, pulse)?;

    struct Ray {
        line: usize,
        towards: usize,
        delay: f64,
        gain: f64,
        sections: Vec<Section>,
        order: usize,
    }

    let mut arrivals = Vec::new();
    let (mut gain, mut sections) = (1.0, Vec::new());
    push_factor(&mut gain, &mut sections, net.launch());
    arrivals.push(Arrival {
        delay: 0.0,
        gain: dc_gain(gain, &sections),
        order: 0,
        constant: gain,
        sections: sections.clone(),
    });

    let mut queue: Vec<Ray> = net
        .lines_at(net.port)
        .map(|l| {
            let line = &net.lines[l];
            Ray {
                line: l,
                towards: if line.a == net.port { line.b } else { line.a },
                delay: line.delay,
                gain,
                sections: sections.clone(),
                order: 0,
            }
        })
        .collect();

    while let Some(ray) = queue.pop() {
        if ray.gain.abs() < GAIN_CUTOFF {
            continue;
        }
        let node = ray.towards;
        let (refl, trans) = net.scattering(node, ray.line);
        if node == net.port {
            let (mut g, mut s) = (ray.gain, ray.sections.clone());
            push_factor(&mut g, &mut s, trans);
            arrivals.push(Arrival {
                delay: ray.delay,
                gain: dc_gain(g, &s),
                order: ray.order,
                constant: g,
                sections: s,
            });
        }
        if ray.order >= max_order {
            continue;
        }
        for next in net.lines_at(node) {
            let factor = if next == ray.line { refl } else { trans };
            let (mut g, mut s) = (ray.gain, ray.sections.clone());
            push_factor(&mut g, &mut s, factor);
            let line = &net.lines[next];
            queue.push(Ray {
                line: next,
                towards: if line.a == node { line.b } else { line.a },
                delay: ray.delay + line.delay,
                gain: g,
                sections: s,
                order: ray.order + 1,
            });
        }
    }
    arrivals.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.order.cmp(&b.order)));
    Ok(arrivals)
}

/// Port voltage predicted by superposing every ray up to `max_order`.
///
/// The source is taken as the piecewise-linear interpolant of the pulse
/// sampled every `dt`, the same stimulus a time-stepped solver sees.
pub fn bounce_oracle(
    topology: &Topology,
    pulse: &PulseSpec,
    max_order: usize,
    dt: f64,
    n_samples: usize,
) -> Result<Waveform, SimError> {
    if !(dt > 0.0) || n_samples == 0 {
        return Err(SimError::InvalidConfig("oracle needs dt > 0 and samples > 0".into()));
    }
    let arrivals = bounce_arrivals(topology, pulse, max_order)?;
    let h = dt / OVERSAMPLE as f64;
    let fine_len = (n_samples - 1) * OVERSAMPLE + 1;
    // Source relative to injection, on the fine grid.
    let coarse: Vec<f64> = (0..n_samples + 1).map(|i| pulse.value(i as f64 * dt)).collect();
    let source: Vec<f64> = (0..fine_len)
        .map(|j| {
            let (i, r) = (j / OVERSAMPLE, (j % OVERSAMPLE) as f64 / OVERSAMPLE as f64);
            coarse[i] + r * (coarse[i + 1] - coarse[i])
        })
        .collect();

    let mut filtered: HashMap<Vec<[u64; 4]>, Vec<f64>> = HashMap::new();
    let mut out = vec![0.0; n_samples];
    for arr in &arrivals {
        let key: Vec<[u64; 4]> = arr.sections.iter().map(Section::key).collect();
        let base = filtered.entry(key).or_insert_with(|| {
            arr.sections
                .iter()
                .fold(source.clone(), |x, s| s.apply(&x, h))
        });
        let static_gain = arr.constant;
        let shift = arr.delay / h;
        for (i, o) in out.iter_mut().enumerate() {
            let pos = (i * OVERSAMPLE) as f64 - shift;
            if pos < 0.0 {
                continue;
            }
            let j = pos.floor() as usize;
            if j + 1 >= fine_len {
                if j < fine_len {
                    *o += static_gain * base[j];
                }
                continue;
            }
            let r = pos - j as f64;
            *o += static_gain * (base[j] + r * (base[j + 1] - base[j]));
        }
    }
    // The source samples above already include the injection delay.
    Waveform::new(pulse.delay, dt, out)
}
