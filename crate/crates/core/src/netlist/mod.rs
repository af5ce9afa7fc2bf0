//! Structural gate-level netlists.
//!
//! Every net has exactly one driver: a primary-input bit or a gate output.
//! Primary-input nets are numbered first, in port order, and gates are
//! stored in topological order, so a single forward pass evaluates the
//! whole circuit.

mod builder;
mod cost;
mod export;
mod sim;

pub use builder::{propagate, Builder};
pub use cost::{area, power_proxy, profile_activity, ActivityProfile, AreaReport, CostTable, STATIC_POWER_COEFF};
pub use export::{to_json, to_verilog, NetlistFormat};
pub use sim::{simulate, simulate_rows, PackedStimulus, SimValues};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NetId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Not,
    And2,
    Or2,
    Nand2,
    Nor2,
    Xor2,
    Xnor2,
    /// Inputs `[sel, a, b]`; output is `b` when `sel` is 1, else `a`.
    Mux2,
    Const0,
    Const1,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Const0 | GateKind::Const1 => 0,
            GateKind::Not => 1,
            GateKind::Mux2 => 3,
            _ => 2,
        }
    }

    pub fn is_const(self) -> bool {
        matches!(self, GateKind::Const0 | GateKind::Const1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
}

/// A named bit-vector, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub nets: Vec<NetId>,
}

impl Port {
    pub fn width(&self) -> usize {
        self.nets.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub name: String,
    pub net_count: usize,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    /// Topological order.
    pub gates: Vec<Gate>,
}

impl Netlist {
    pub fn input_bits(&self) -> usize {
        self.inputs.iter().map(Port::width).sum()
    }

    /// Gates other than constant drivers.
    pub fn logic_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.kind.is_const()).count()
    }

    pub fn output(&self, name: &str) -> Option<&Port> {
        self.outputs.iter().find(|p| p.name == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|p| p.name == name)
    }

    /// Checks the structural invariants: primary inputs occupy nets
    /// `0..input_bits` in port order, every net has a single driver, every
    /// gate reads only nets driven before it, and every output is driven.
    pub fn validate(&self) -> Result<()> {
        let mut driven = vec![false; self.net_count];
        let mut next = 0usize;
        for port in &self.inputs {
            for &net in &port.nets {
                if net as usize != next {
                    return Err(Error::InvalidNetlist(format!(
                        "input `{}` bit uses net {net}, expected {next}",
                        port.name
                    )));
                }
                driven[next] = true;
                next += 1;
            }
        }
        for (i, gate) in self.gates.iter().enumerate() {
            if gate.inputs.len() != gate.kind.arity() {
                return Err(Error::InvalidNetlist(format!(
                    "gate {i} ({:?}) has {} inputs",
                    gate.kind,
                    gate.inputs.len()
                )));
            }
            for &input in &gate.inputs {
                if !driven.get(input as usize).copied().unwrap_or(false) {
                    return Err(Error::InvalidNetlist(format!(
                        "gate {i} reads net {input} before it is driven (cycle or dangling net)"
                    )));
                }
            }
            let out = gate.output as usize;
            match driven.get(out) {
                None => {
                    return Err(Error::InvalidNetlist(format!(
                        "gate {i} drives net {out} beyond net_count"
                    )))
                }
                Some(true) => return Err(Error::InvalidNetlist(format!("net {out} has multiple drivers"))),
                Some(false) => driven[out] = true,
            }
        }
        for port in &self.outputs {
            for &net in &port.nets {
                if !driven.get(net as usize).copied().unwrap_or(false) {
                    return Err(Error::InvalidNetlist(format!(
                        "output `{}` reads undriven net {net}",
                        port.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let n: Netlist = serde_json::from_str(text).map_err(|e| Error::InvalidNetlist(e.to_string()))?;
        n.validate()?;
        Ok(n)
    }
}
