//! Line-oriented topology file format.
//!
//! ```text
//! # powertrain bus
//! line  z0=120 v=2e8
//! bus   length=14
//! term  pos=0   r=120
//! term  pos=end r=120
//! node  label=Engine pos=4.11 stub=0.1 r=70k c=16p
//! meas  pos=0
//! ```
//!
//! `node` accepts `r=open` for an unloaded stub; `r` and `c` default to the
//! transceiver model when omitted.

use super::{
    semantic, LineParams, LoadKind, NodeLoad, Segment, Stub, Topology, TopologyError,
    TRANSCEIVER_CAPACITANCE, TRANSCEIVER_RESISTANCE,
};
use crate::units::{format_si, parse_si};
use std::collections::BTreeMap;
use std::fmt::Write;

enum Pos {
    Start,
    End,
    At(f64),
}

struct Fields<'a> {
    line: usize,
    keyword: &'a str,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, keyword: &'a str, tokens: &[&'a str], allowed: &[&str]) -> Result<Self, TopologyError> {
        let mut map = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| TopologyError::Syntax {
                line,
                message: format!("expected key=value, found '{tok}'"),
            })?;
            if !allowed.contains(&k) {
                return Err(TopologyError::Syntax {
                    line,
                    message: format!("unknown key '{k}' for '{keyword}'"),
                });
            }
            if map.insert(k, v).is_some() {
                return Err(TopologyError::Syntax {
                    line,
                    message: format!("key '{k}' given twice"),
                });
            }
        }
        Ok(Self { line, keyword, map })
    }

    fn raw(&self, key: &str) -> Result<&'a str, TopologyError> {
        self.map.get(key).copied().ok_or_else(|| TopologyError::Syntax {
            line: self.line,
            message: format!("'{}' requires {key}=", self.keyword),
        })
    }

    fn number(&self, key: &str) -> Result<f64, TopologyError> {
        let raw = self.raw(key)?;
        parse_si(raw).map_err(|e| TopologyError::Syntax {
            line: self.line,
            message: e.to_string(),
        })
    }

    fn optional_number(&self, key: &str) -> Result<Option<f64>, TopologyError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(_) => self.number(key).map(Some),
        }
    }

    fn position(&self, key: &str) -> Result<Pos, TopologyError> {
        match self.raw(key)? {
            "0" => Ok(Pos::Start),
            "end" => Ok(Pos::End),
            _ => self.number(key).map(Pos::At),
        }
    }
}

/// Parses and validates a topology document.
pub fn parse_topology(text: &str) -> Result<Topology, TopologyError> {
    let mut line_params: Option<LineParams> = None;
    let mut bus_length: Option<f64> = None;
    let mut terms: [Option<NodeLoad>; 2] = [None, None];
    let mut meas: Option<Pos> = None;
    let mut nodes: Vec<(String, f64, f64, NodeLoad)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = content.split_whitespace().collect();
        let keyword = tokens.remove(0);
        let dup = |what: &str| TopologyError::Syntax {
            line,
            message: format!("'{what}' declared more than once"),
        };
        match keyword {
            "line" => {
                let f = Fields::parse(line, keyword, &tokens, &["z0", "v"])?;
                if line_params.is_some() {
                    return Err(dup("line"));
                }
                let p = LineParams::from_impedance_velocity(f.number("z0")?, f.number("v")?)
                    .map_err(|e| TopologyError::Syntax {
                        line,
                        message: e.to_string(),
                    })?;
                line_params = Some(p);
            }
            "bus" => {
                let f = Fields::parse(line, keyword, &tokens, &["length"])?;
                if bus_length.is_some() {
                    return Err(dup("bus"));
                }
                bus_length = Some(f.number("length")?);
            }
            "term" => {
                let f = Fields::parse(line, keyword, &tokens, &["pos", "r"])?;
                let slot = match f.position("pos")? {
                    Pos::Start => 0,
                    Pos::End => 1,
                    Pos::At(_) => {
                        return Err(TopologyError::Syntax {
                            line,
                            message: "term pos must be 0 or end".into(),
                        })
                    }
                };
                if terms[slot].is_some() {
                    return Err(dup(if slot == 0 { "term pos=0" } else { "term pos=end" }));
                }
                let r = f.raw("r").map_err(|_| {
                    semantic(
                        if slot == 0 { "term pos=0" } else { "term pos=end" },
                        format!("missing termination resistance (line {line})"),
                    )
                })?;
                let r = parse_si(r).map_err(|e| TopologyError::Syntax {
                    line,
                    message: e.to_string(),
                })?;
                terms[slot] = Some(NodeLoad::termination(r));
            }
            "node" => {
                let f = Fields::parse(line, keyword, &tokens, &["label", "pos", "stub", "r", "c"])?;
                let label = f.raw("label")?.to_string();
                let pos = f.number("pos")?;
                let stub = f.number("stub")?;
                let load = match f.map.get("r").copied() {
                    Some("open") => {
                        let c = f.optional_number("c")?.unwrap_or(0.0);
                        if c == 0.0 {
                            NodeLoad::open()
                        } else {
                            NodeLoad::custom(f64::INFINITY, c)
                        }
                    }
                    _ => {
                        let r = f.optional_number("r")?.unwrap_or(TRANSCEIVER_RESISTANCE);
                        let c = f.optional_number("c")?.unwrap_or(TRANSCEIVER_CAPACITANCE);
                        if r == TRANSCEIVER_RESISTANCE && c == TRANSCEIVER_CAPACITANCE {
                            NodeLoad::transceiver()
                        } else {
                            NodeLoad::custom(r, c)
                        }
                    }
                };
                nodes.push((label, pos, stub, load));
            }
            "meas" => {
                let f = Fields::parse(line, keyword, &tokens, &["pos"])?;
                if meas.is_some() {
                    return Err(dup("meas"));
                }
                meas = Some(f.position("pos")?);
            }
            other => {
                return Err(TopologyError::Syntax {
                    line,
                    message: format!("unknown keyword '{other}'"),
                })
            }
        }
    }

    let params = line_params.ok_or_else(|| semantic("line", "missing required 'line' declaration"))?;
    let length = bus_length.ok_or_else(|| semantic("bus", "missing required 'bus' declaration"))?;
    if !(length > 0.0) {
        return Err(semantic("bus", format!("nonpositive length {length}")));
    }
    let meas = meas.ok_or_else(|| semantic("meas", "missing required 'meas' declaration"))?;
    let measurement_position = match meas {
        Pos::Start => 0.0,
        Pos::End => length,
        Pos::At(x) => x,
    };
    for (label, pos, stub, _) in &nodes {
        if !(*stub >= 0.0) {
            return Err(semantic(label.as_str(), format!("nonpositive stub length {stub}")));
        }
        if !(*pos > 0.0 && *pos < length) {
            return Err(semantic(
                label.as_str(),
                format!("position {pos} m lies outside the bus (0, {length}) m"),
            ));
        }
    }
    let stubs = nodes
        .into_iter()
        .map(|(label, position, length, load)| Stub {
            label,
            position,
            length,
            params,
            load,
        })
        .collect();
    let [start, end] = terms;
    Topology::new(
        vec![Segment { length, params }],
        stubs,
        [start.unwrap_or_else(NodeLoad::open), end.unwrap_or_else(NodeLoad::open)],
        measurement_position,
    )
}

fn format_resistance(r: f64) -> String {
    if r.is_infinite() {
        "open".to_string()
    } else {
        format_si(r)
    }
}

/// Writes a topology back to the text format.
///
/// The format carries one line declaration, so every segment and stub must
/// share the parameters of the first bus segment.
pub fn serialize_topology(topology: &Topology) -> Result<String, TopologyError> {
    let params = topology.line_params();
    if topology.segments().iter().any(|s| s.params != params)
        || topology.stubs().iter().any(|s| s.params != params)
    {
        return Err(semantic(
            "line",
            "topology mixes line parameters; the text format holds only one",
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "line z0={} v={}", format_si(params.impedance()), format_si(params.velocity()));
    let _ = writeln!(out, "bus length={}", format_si(topology.total_length()));
    for (pos, load) in ["0", "end"].iter().zip(topology.end_loads()) {
        match load.kind {
            LoadKind::Open => {}
            _ if load.capacitance == 0.0 && load.resistance.is_finite() => {
                let _ = writeln!(out, "term pos={pos} r={}", format_si(load.resistance));
            }
            _ => {
                return Err(semantic(
                    format!("term pos={pos}"),
                    "bus end load is not a plain resistor",
                ))
            }
        }
    }
    for stub in topology.stubs() {
        let _ = writeln!(
            out,
            "node label={} pos={} stub={} r={} c={}",
            stub.label,
            format_si(stub.position),
            format_si(stub.length),
            format_resistance(stub.load.resistance),
            format_si(stub.load.capacitance),
        );
    }
    let _ = writeln!(out, "meas pos={}", format_si(topology.measurement_position()));
    Ok(out)
}
