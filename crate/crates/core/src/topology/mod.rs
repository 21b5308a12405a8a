//! Physical description of the bus: line segments, ECU stubs, terminal loads
//! and the measurement port, plus the lumped-circuit impedance arithmetic.

mod format;

pub use format::{parse_topology, serialize_topology};

use thiserror::Error;

/// Transceiver input resistance used when a node does not override it.
pub const TRANSCEIVER_RESISTANCE: f64 = 70e3;
/// Transceiver input capacitance used when a node does not override it.
pub const TRANSCEIVER_CAPACITANCE: f64 = 16e-12;

/// Relative tolerance used when comparing positions along the bus.
const POSITION_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{entity}: {message}")]
    Semantic { entity: String, message: String },
    #[error("invalid line parameters: {0}")]
    InvalidLine(String),
    #[error("device '{label}' at {position} m lies outside the bus (0, {bus_length}) m")]
    OutOfRange {
        label: String,
        position: f64,
        bus_length: f64,
    },
    #[error("duplicate device label '{0}'")]
    DuplicateLabel(String),
    #[error("no device labelled '{0}'")]
    UnknownLabel(String),
    #[error("every load is open; the bus has no finite resistance")]
    AllOpen,
}

fn semantic(entity: impl Into<String>, message: impl Into<String>) -> TopologyError {
    TopologyError::Semantic {
        entity: entity.into(),
        message: message.into(),
    }
}

/// Per-unit-length parameters of a lossless line.
///
/// Stored as the (impedance, velocity) pair the topology format declares;
/// the distributed inductance and capacitance are derived from it. Series
/// resistance and shunt conductance are identically zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    z0: f64,
    velocity: f64,
}

impl LineParams {
    pub fn from_impedance_velocity(z0: f64, velocity: f64) -> Result<Self, TopologyError> {
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(TopologyError::InvalidLine(format!("z0 must be positive, got {z0}")));
        }
        if !(velocity.is_finite() && velocity > 0.0) {
            return Err(TopologyError::InvalidLine(format!(
                "velocity must be positive, got {velocity}"
            )));
        }
        Ok(Self { z0, velocity })
    }

    /// Builds the parameters from distributed inductance (H/m) and capacitance (F/m).
    pub fn from_lc(inductance_per_m: f64, capacitance_per_m: f64) -> Result<Self, TopologyError> {
        let (l, c) = (inductance_per_m, capacitance_per_m);
        if !(l.is_finite() && l > 0.0 && c.is_finite() && c > 0.0) {
            return Err(TopologyError::InvalidLine(format!(
                "L' and C' must be positive, got L'={l}, C'={c}"
            )));
        }
        Self::from_impedance_velocity((l / c).sqrt(), 1.0 / (l * c).sqrt())
    }

    pub fn inductance_per_m(&self) -> f64 {
        self.z0 / self.velocity
    }

    pub fn capacitance_per_m(&self) -> f64 {
        1.0 / (self.z0 * self.velocity)
    }

    pub fn resistance_per_m(&self) -> f64 {
        0.0
    }

    pub fn conductance_per_m(&self) -> f64 {
        0.0
    }

    pub fn impedance(&self) -> f64 {
        self.z0
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }
}

impl Default for LineParams {
    /// ISO 11898 nominal cable: 120 Ω at 2·10⁸ m/s.
    fn default() -> Self {
        Self {
            z0: 120.0,
            velocity: 2e8,
        }
    }
}

/// Lossless characteristic impedance √(L′/C′).
///
/// The general form √((R′ + jωL′)/(G′ + jωC′)) reduces to this because the
/// line model carries no series resistance or shunt conductance.
pub fn characteristic_impedance(params: &LineParams) -> f64 {
    (params.inductance_per_m() / params.capacitance_per_m()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadKind {
    TerminationResistor,
    Transceiver,
    Open,
    Custom,
}

/// A lumped load modelled as a resistor in parallel with a capacitor.
/// An open load has infinite resistance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLoad {
    pub kind: LoadKind,
    pub resistance: f64,
    pub capacitance: f64,
}

impl NodeLoad {
    pub fn termination(resistance: f64) -> Self {
        Self {
            kind: LoadKind::TerminationResistor,
            resistance,
            capacitance: 0.0,
        }
    }

    pub fn transceiver() -> Self {
        Self {
            kind: LoadKind::Transceiver,
            resistance: TRANSCEIVER_RESISTANCE,
            capacitance: TRANSCEIVER_CAPACITANCE,
        }
    }

    pub fn open() -> Self {
        Self {
            kind: LoadKind::Open,
            resistance: f64::INFINITY,
            capacitance: 0.0,
        }
    }

    pub fn custom(resistance: f64, capacitance: f64) -> Self {
        Self {
            kind: LoadKind::Custom,
            resistance,
            capacitance,
        }
    }

    pub fn is_open(&self) -> bool {
        self.resistance.is_infinite() && self.capacitance == 0.0
    }

    pub fn conductance(&self) -> f64 {
        if self.resistance.is_infinite() {
            0.0
        } else {
            1.0 / self.resistance
        }
    }

    fn validate(&self, entity: &str) -> Result<(), TopologyError> {
        if self.resistance.is_nan() || self.resistance <= 0.0 {
            return Err(semantic(entity, "load resistance must be positive"));
        }
        if !(self.capacitance.is_finite() && self.capacitance >= 0.0) {
            return Err(semantic(entity, "load capacitance must be non-negative"));
        }
        if self.kind == LoadKind::TerminationResistor
            && (self.capacitance != 0.0 || !self.resistance.is_finite())
        {
            return Err(semantic(entity, "termination must be a finite pure resistor"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub length: f64,
    pub params: LineParams,
}

/// A branch line from the main bus to a device.
#[derive(Debug, Clone, PartialEq)]
pub struct Stub {
    pub label: String,
    /// Attachment point, metres from the bus start.
    pub position: f64,
    /// Branch length in metres; zero places the load directly on the bus.
    pub length: f64,
    pub params: LineParams,
    pub load: NodeLoad,
}

/// Which bus end a termination sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusEnd {
    Start,
    End,
}

/// A validated bus description. Immutable once constructed; modifications
/// return new values.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    segments: Vec<Segment>,
    stubs: Vec<Stub>,
    end_loads: [NodeLoad; 2],
    measurement_position: f64,
}

impl Topology {
    pub fn new(
        segments: Vec<Segment>,
        stubs: Vec<Stub>,
        end_loads: [NodeLoad; 2],
        measurement_position: f64,
    ) -> Result<Self, TopologyError> {
        let topology = Self {
            segments,
            stubs,
            end_loads,
            measurement_position,
        };
        topology.validate()?;
        Ok(topology)
    }

    /// A uniform bus of one segment with both ends terminated and the port at
    /// the start. Handy for tests and quick experiments.
    pub fn uniform(
        length: f64,
        params: LineParams,
        start: NodeLoad,
        end: NodeLoad,
    ) -> Result<Self, TopologyError> {
        Self::new(vec![Segment { length, params }], Vec::new(), [start, end], 0.0)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        if self.segments.is_empty() {
            return Err(semantic("bus", "at least one bus segment is required"));
        }
        for seg in &self.segments {
            if !(seg.length.is_finite() && seg.length > 0.0) {
                return Err(semantic("bus", format!("nonpositive length {}", seg.length)));
            }
        }
        let total = self.total_length();
        self.end_loads[0].validate("term pos=0")?;
        self.end_loads[1].validate("term pos=end")?;

        for (i, stub) in self.stubs.iter().enumerate() {
            if stub.label.is_empty() || stub.label.chars().any(char::is_whitespace) {
                return Err(semantic(
                    format!("node #{}", i + 1),
                    "label must be non-empty and contain no whitespace",
                ));
            }
            if self.stubs[..i].iter().any(|s| s.label == stub.label) {
                return Err(TopologyError::DuplicateLabel(stub.label.clone()));
            }
            if !(stub.position.is_finite() && stub.position > 0.0 && stub.position < total) {
                return Err(TopologyError::OutOfRange {
                    label: stub.label.clone(),
                    position: stub.position,
                    bus_length: total,
                });
            }
            if !(stub.length.is_finite() && stub.length >= 0.0) {
                return Err(semantic(
                    stub.label.as_str(),
                    format!("stub length must be non-negative, got {}", stub.length),
                ));
            }
            stub.load.validate(&stub.label)?;
        }

        let m = self.measurement_position;
        let tol = POSITION_EPS * total.max(1.0);
        let at_end = m.abs() <= tol || (m - total).abs() <= tol;
        let at_stub = self.stubs.iter().any(|s| (s.position - m).abs() <= tol);
        if !(m.is_finite() && (at_end || at_stub)) {
            return Err(semantic(
                "meas",
                format!("measurement position {m} m is neither a bus end nor a declared node"),
            ));
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn stubs(&self) -> &[Stub] {
        &self.stubs
    }

    pub fn stub(&self, label: &str) -> Option<&Stub> {
        self.stubs.iter().find(|s| s.label == label)
    }

    pub fn end_load(&self, end: BusEnd) -> &NodeLoad {
        match end {
            BusEnd::Start => &self.end_loads[0],
            BusEnd::End => &self.end_loads[1],
        }
    }

    pub fn end_loads(&self) -> &[NodeLoad; 2] {
        &self.end_loads
    }

    pub fn measurement_position(&self) -> f64 {
        self.measurement_position
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Bus length plus every stub length.
    pub fn total_cable_length(&self) -> f64 {
        self.total_length() + self.stubs.iter().map(|s| s.length).sum::<f64>()
    }

    /// Line parameters of the first bus segment.
    pub fn line_params(&self) -> LineParams {
        self.segments[0].params
    }

    /// Propagation velocity 1/√(L′C′) of the main bus.
    pub fn propagation_velocity(&self) -> f64 {
        let p = self.line_params();
        1.0 / (p.inductance_per_m() * p.capacitance_per_m()).sqrt()
    }

    /// Line parameters of the bus segment containing `position`.
    pub fn params_at(&self, position: f64) -> LineParams {
        let mut start = 0.0;
        for seg in &self.segments {
            if position <= start + seg.length {
                return seg.params;
            }
            start += seg.length;
        }
        self.segments[self.segments.len() - 1].params
    }

    /// Every lumped load on the network: both bus ends, then the stubs.
    pub fn loads(&self) -> impl Iterator<Item = &NodeLoad> {
        self.end_loads.iter().chain(self.stubs.iter().map(|s| &s.load))
    }

    /// Returns a copy with one more stub. Coincident attachment points are
    /// allowed and end up sharing one junction.
    pub fn attach_device(
        &self,
        position: f64,
        stub_length: f64,
        load: NodeLoad,
        label: &str,
    ) -> Result<Topology, TopologyError> {
        if self.stub(label).is_some() {
            return Err(TopologyError::DuplicateLabel(label.to_string()));
        }
        let mut next = self.clone();
        next.stubs.push(Stub {
            label: label.to_string(),
            position,
            length: stub_length,
            params: self.params_at(position),
            load,
        });
        next.validate()?;
        Ok(next)
    }

    /// Returns a copy where the labelled device is unplugged: its stub cable
    /// stays on the bus but ends open.
    pub fn detach_device(&self, label: &str) -> Result<Topology, TopologyError> {
        let mut next = self.clone();
        let stub = next
            .stubs
            .iter_mut()
            .find(|s| s.label == label)
            .ok_or_else(|| TopologyError::UnknownLabel(label.to_string()))?;
        stub.load = NodeLoad::open();
        Ok(next)
    }

    /// Returns a copy without the labelled stub at all.
    pub fn remove_stub(&self, label: &str) -> Result<Topology, TopologyError> {
        let idx = self
            .stubs
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| TopologyError::UnknownLabel(label.to_string()))?;
        let mut next = self.clone();
        next.stubs.remove(idx);
        next.validate()?;
        Ok(next)
    }
}

/// Parallel combination of the finite resistances in `resistances`.
/// `None` when every entry is infinite (or the list is empty).
pub fn parallel_resistance(resistances: impl IntoIterator<Item = f64>) -> Option<f64> {
    let g: f64 = resistances
        .into_iter()
        .filter(|r| r.is_finite())
        .map(|r| 1.0 / r)
        .sum();
    (g > 0.0).then(|| 1.0 / g)
}

/// DC resistance seen across the bus: all termination and transceiver input
/// resistances in parallel, line resistance neglected.
pub fn total_bus_resistance(topology: &Topology) -> Result<f64, TopologyError> {
    parallel_resistance(topology.loads().map(|l| l.resistance)).ok_or(TopologyError::AllOpen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node_bus() -> Topology {
        let p = LineParams::default();
        let t = Topology::uniform(10.0, p, NodeLoad::termination(120.0), NodeLoad::termination(120.0))
            .unwrap();
        let t = t.attach_device(3.0, 0.3, NodeLoad::transceiver(), "A").unwrap();
        t.attach_device(6.0, 0.3, NodeLoad::transceiver(), "B").unwrap()
    }

    #[test]
    fn lc_from_impedance_and_velocity() {
        let p = LineParams::from_impedance_velocity(120.0, 2e8).unwrap();
        assert!((p.inductance_per_m() - 600e-9).abs() < 1e-18);
        assert!((p.capacitance_per_m() - 41.666_666_666_666_67e-12).abs() < 1e-22);
        let back = LineParams::from_lc(600e-9, 1.0 / (120.0 * 2e8)).unwrap();
        assert!((characteristic_impedance(&back) - 120.0).abs() < 1e-9);
        assert!((back.velocity() - 2e8).abs() / 2e8 < 1e-12);
    }

    #[test]
    fn impedance_examples() {
        let p = LineParams::from_lc(600e-9, 41.67e-12).unwrap();
        assert!((characteristic_impedance(&p) - 120.0).abs() < 0.01);
        let unit = LineParams::from_lc(3e-7, 3e-7).unwrap();
        assert!((characteristic_impedance(&unit) - 1.0).abs() < 1e-12);
        let cable = LineParams::from_impedance_velocity(117.0, 2e8).unwrap();
        assert!((characteristic_impedance(&cable) - 117.0).abs() < 1e-9);
    }

    #[test]
    fn impedance_is_ratio_invariant() {
        let p = LineParams::from_lc(5e-7, 4e-11).unwrap();
        for k in [1e-3, 0.5, 2.0, 1e4] {
            let q = LineParams::from_lc(5e-7 * k, 4e-11 * k).unwrap();
            let (a, b) = (characteristic_impedance(&p), characteristic_impedance(&q));
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn invalid_line_params() {
        assert!(LineParams::from_lc(0.0, 1e-11).is_err());
        assert!(LineParams::from_lc(1e-7, -1.0).is_err());
        assert!(LineParams::from_impedance_velocity(120.0, f64::NAN).is_err());
    }

    #[test]
    fn velocity_matches_lc() {
        let t = two_node_bus();
        let p = t.line_params();
        let v = 1.0 / (p.inductance_per_m() * p.capacitance_per_m()).sqrt();
        assert!((t.propagation_velocity() - v).abs() / v < 1e-6);
    }

    #[test]
    fn resistance_two_terminations_two_transceivers() {
        let t = two_node_bus();
        let r = total_bus_resistance(&t).unwrap();
        assert!((r - 59.8973).abs() < 0.0005, "{r}");
        let more = t.attach_device(8.0, 0.3, NodeLoad::transceiver(), "C").unwrap();
        let dr = r - total_bus_resistance(&more).unwrap();
        assert!((dr - 0.0512).abs() < 0.0005, "{dr}");
    }

    #[test]
    fn resistance_single_termination_and_all_open() {
        let p = LineParams::default();
        let t = Topology::uniform(5.0, p, NodeLoad::termination(120.0), NodeLoad::open()).unwrap();
        assert_eq!(total_bus_resistance(&t).unwrap(), 120.0);
        let open = Topology::uniform(5.0, p, NodeLoad::open(), NodeLoad::open()).unwrap();
        assert_eq!(total_bus_resistance(&open), Err(TopologyError::AllOpen));
    }

    #[test]
    fn attach_does_not_mutate_and_rejects_bad_input() {
        let t = two_node_bus();
        let before = t.clone();
        let u = t.attach_device(9.86, 0.2, NodeLoad::transceiver(), "alien").unwrap();
        assert_eq!(t, before);
        assert_eq!(u.stubs().len(), 3);
        assert!(matches!(
            t.attach_device(15.0, 0.2, NodeLoad::transceiver(), "x"),
            Err(TopologyError::OutOfRange { .. })
        ));
        assert_eq!(
            t.attach_device(4.0, 0.2, NodeLoad::transceiver(), "A"),
            Err(TopologyError::DuplicateLabel("A".into()))
        );
        // coincident and zero-length attachments are both legal
        assert!(t.attach_device(3.0, 0.3, NodeLoad::transceiver(), "C").is_ok());
        assert!(t.attach_device(5.0, 0.0, NodeLoad::transceiver(), "D").is_ok());
    }

    #[test]
    fn detach_and_remove() {
        let t = two_node_bus();
        let d = t.detach_device("A").unwrap();
        assert!(d.stub("A").unwrap().load.is_open());
        let r = t.remove_stub("B").unwrap();
        assert!(r.stub("B").is_none());
        assert_eq!(t.detach_device("nope"), Err(TopologyError::UnknownLabel("nope".into())));
    }

    #[test]
    fn measurement_must_sit_on_end_or_node() {
        let p = LineParams::default();
        let seg = vec![Segment { length: 10.0, params: p }];
        let ends = [NodeLoad::termination(120.0), NodeLoad::termination(120.0)];
        assert!(Topology::new(seg.clone(), vec![], ends, 10.0).is_ok());
        assert!(Topology::new(seg, vec![], ends, 4.0).is_err());
    }
}
