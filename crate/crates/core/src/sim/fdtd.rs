//! Leap-frog FDTD solver for networks of lossless lines.
//!
//! Each line is split into cells of one spatial step. Voltages live on cell
//! boundaries and currents on cell centres, half a time step apart:
//!
//! ```text
//! I[k] -= dt/(L' dz) * (V[k+1] - V[k])
//! V[k] -= dt/(C' dz) * (I[k]   - I[k-1])
//! ```
//!
//! Line ends meet at junction nodes. A node owns half a cell of capacitance
//! from every line touching it plus any lumped load capacitance, and obeys
//! KCL. Resistive loads and the Thevenin source enter through the
//! trapezoidal rule, which keeps the update unconditionally stable for the
//! stiff RC time constants of transceiver inputs.

use super::{PulseSpec, SimConfig, SimError, Waveform};
use crate::topology::{LineParams, NodeLoad, Topology};

const MAX_SNAP_DISTORTION: f64 = 0.01;

#[derive(Debug, Clone)]
struct Node {
    capacitance: f64,
    conductance: f64,
    /// Conductance of the source resistor, if the port sits here.
    source_conductance: f64,
    /// Ideal (zero-impedance) source: the node voltage is imposed.
    forced: bool,
    voltage: f64,
}

impl Node {
    fn new() -> Self {
        Self {
            capacitance: 0.0,
            conductance: 0.0,
            source_conductance: 0.0,
            forced: false,
            voltage: 0.0,
        }
    }

    fn add_load(&mut self, load: &NodeLoad) {
        self.conductance += load.conductance();
        self.capacitance += load.capacitance;
    }
}

#[derive(Debug, Clone)]
struct Edge {
    from: usize,
    to: usize,
    /// Interior voltages, `cells - 1` of them.
    voltage: Vec<f64>,
    /// Cell-centre currents, positive in the from → to direction.
    current: Vec<f64>,
    cell_capacitance: f64,
    cell_inductance: f64,
}

impl Edge {
    fn cells(&self) -> usize {
        self.current.len()
    }
}

/// A discretised network ready to be time-stepped.
#[derive(Debug, Clone)]
pub struct FdtdSolver {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    port: usize,
    pulse: PulseSpec,
    dt: f64,
    step: usize,
    dissipated: f64,
}

fn snapped_cells(entity: &str, length: f64, dz: f64) -> Result<usize, SimError> {
    let cells = (length / dz).round();
    let snapped = cells * dz;
    if cells < 1.0 || (snapped - length).abs() > MAX_SNAP_DISTORTION * length {
        return Err(SimError::Snapping {
            entity: entity.to_string(),
            length,
            snapped,
        });
    }
    Ok(cells as usize)
}

impl FdtdSolver {
    pub fn new(topology: &Topology, pulse: &PulseSpec, config: &SimConfig) -> Result<Self, SimError> {
        pulse.validate()?;
        config.validate(topology)?;
        let dz = config.spatial_step;
        let dt = config.time_step;
        let total = topology.total_length();
        let tol = 1e-9 * total.max(1.0);

        // Junction positions along the bus; coincident points share one node.
        let mut positions = vec![0.0, total];
        let mut boundary = 0.0;
        for seg in topology.segments() {
            boundary += seg.length;
            positions.push(boundary.min(total));
        }
        positions.extend(topology.stubs().iter().map(|s| s.position));
        positions.sort_by(f64::total_cmp);
        positions.dedup_by(|a, b| (*a - *b).abs() <= tol);
        let bus_node = |x: f64| -> usize {
            positions
                .iter()
                .position(|p| (p - x).abs() <= tol)
                .expect("position registered above")
        };

        let mut nodes = vec![Node::new(); positions.len()];
        let mut edges = Vec::new();
        let mut add_edge = |nodes: &mut Vec<Node>, from: usize, to: usize, cells: usize, params: LineParams| {
            let cell_capacitance = params.capacitance_per_m() * dz;
            let cell_inductance = params.inductance_per_m() * dz;
            nodes[from].capacitance += 0.5 * cell_capacitance;
            nodes[to].capacitance += 0.5 * cell_capacitance;
            edges.push(Edge {
                from,
                to,
                voltage: vec![0.0; cells - 1],
                current: vec![0.0; cells],
                cell_capacitance,
                cell_inductance,
            });
        };

        for (i, pair) in positions.windows(2).enumerate() {
            let length = pair[1] - pair[0];
            let cells = snapped_cells(&format!("bus piece {:.4}..{:.4} m", pair[0], pair[1]), length, dz)?;
            let params = topology.params_at(0.5 * (pair[0] + pair[1]));
            add_edge(&mut nodes, i, i + 1, cells, params);
        }

        let start = bus_node(0.0);
        let end = bus_node(total);
        nodes[start].add_load(&topology.end_loads()[0]);
        nodes[end].add_load(&topology.end_loads()[1]);

        for stub in topology.stubs() {
            let junction = bus_node(stub.position);
            if stub.length == 0.0 {
                nodes[junction].add_load(&stub.load);
                continue;
            }
            let cells = snapped_cells(&stub.label, stub.length, dz)?;
            nodes.push(Node::new());
            let tip = nodes.len() - 1;
            nodes[tip].add_load(&stub.load);
            add_edge(&mut nodes, junction, tip, cells, stub.params);
        }

        let port = bus_node(topology.measurement_position());
        if pulse.source_impedance == 0.0 {
            nodes[port].forced = true;
        } else {
            nodes[port].source_conductance = 1.0 / pulse.source_impedance;
        }

        Ok(Self {
            nodes,
            edges,
            port,
            pulse: *pulse,
            dt,
            step: 0,
            dissipated: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn port_voltage(&self) -> f64 {
        self.nodes[self.port].voltage
    }

    /// Total cell count over all lines.
    pub fn cell_count(&self) -> usize {
        self.edges.iter().map(Edge::cells).sum()
    }

    /// Advances one time step.
    pub fn step(&mut self) {
        let dt = self.dt;

        for edge in &mut self.edges {
            let n = edge.cells();
            let coeff = dt / edge.cell_inductance;
            let v_from = self.nodes[edge.from].voltage;
            let v_to = self.nodes[edge.to].voltage;
            for k in 0..n {
                let left = if k == 0 { v_from } else { edge.voltage[k - 1] };
                let right = if k + 1 == n { v_to } else { edge.voltage[k] };
                edge.current[k] -= coeff * (right - left);
            }
            let coeff = dt / edge.cell_capacitance;
            for k in 1..n {
                edge.voltage[k - 1] -= coeff * (edge.current[k] - edge.current[k - 1]);
            }
        }

        let mut injected = vec![0.0; self.nodes.len()];
        for edge in &self.edges {
            injected[edge.from] -= edge.current[0];
            injected[edge.to] += edge.current[edge.cells() - 1];
        }

        let vs_now = self.pulse.value(self.time());
        let vs_next = self.pulse.value(self.time() + dt);
        let vs_mid = 0.5 * (vs_now + vs_next);
        let mut dissipated = 0.0;
        for (node, inj) in self.nodes.iter_mut().zip(injected) {
            let old = node.voltage;
            if node.forced {
                node.voltage = vs_next;
                continue;
            }
            let g = node.conductance + node.source_conductance;
            let c_dt = node.capacitance / dt;
            let new = ((c_dt - 0.5 * g) * old + inj + node.source_conductance * vs_mid) / (c_dt + 0.5 * g);
            node.voltage = new;
            let avg = 0.5 * (old + new);
            dissipated += dt
                * (node.conductance * avg * avg
                    + node.source_conductance * (avg - vs_mid) * (avg - vs_mid));
        }
        self.dissipated += dissipated;
        self.step += 1;
    }

    /// Energy stored in line capacitance, line inductance and node capacitance.
    pub fn stored_energy(&self) -> f64 {
        let lines: f64 = self
            .edges
            .iter()
            .map(|e| {
                let ve: f64 = e.voltage.iter().map(|v| v * v).sum();
                let ie: f64 = e.current.iter().map(|i| i * i).sum();
                0.5 * e.cell_capacitance * ve + 0.5 * e.cell_inductance * ie
            })
            .sum();
        let nodes: f64 = self
            .nodes
            .iter()
            .map(|n| 0.5 * n.capacitance * n.voltage * n.voltage)
            .sum();
        lines + nodes
    }

    /// Energy absorbed so far by resistive loads and the source resistor.
    pub fn dissipated_energy(&self) -> f64 {
        self.dissipated
    }

    /// Largest voltage magnitude anywhere on the network.
    pub fn peak_voltage(&self) -> f64 {
        let lines = self
            .edges
            .iter()
            .flat_map(|e| e.voltage.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        self.nodes.iter().fold(lines, |m, n| m.max(n.voltage.abs()))
    }
}

/// Simulates one noise-free TDR capture at the measurement port.
pub fn simulate_tdr(topology: &Topology, pulse: &PulseSpec, config: &SimConfig) -> Result<Waveform, SimError> {
    let mut solver = FdtdSolver::new(topology, pulse, config)?;
    let steps = config.steps();
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(solver.port_voltage());
    for _ in 0..steps {
        solver.step();
        samples.push(solver.port_voltage());
    }
    Waveform::new(pulse.delay, config.time_step, samples)
}
