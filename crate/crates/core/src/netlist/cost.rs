//! Area, switching activity and the power proxy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GateKind, Netlist, PackedStimulus};

/// Gate-equivalent weights, normalized to a two-input NAND.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub not: f64,
    pub and_or: f64,
    pub xor_mux: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        CostTable {
            not: 0.5,
            and_or: 1.0,
            xor_mux: 2.0,
        }
    }
}

impl CostTable {
    pub fn weight(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::Const0 | GateKind::Const1 => 0.0,
            GateKind::Not => self.not,
            GateKind::And2 | GateKind::Or2 | GateKind::Nand2 | GateKind::Nor2 => self.and_or,
            GateKind::Xor2 | GateKind::Xnor2 | GateKind::Mux2 => self.xor_mux,
        }
    }
}

/// Static power per gate-equivalent in the power proxy.
pub const STATIC_POWER_COEFF: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub gate_equivalents: f64,
    pub table: CostTable,
    /// Weight of each gate, in netlist order.
    pub per_gate: Vec<f64>,
}

pub fn area(n: &Netlist) -> AreaReport {
    area_with(n, CostTable::default())
}

pub fn area_with(n: &Netlist, table: CostTable) -> AreaReport {
    let per_gate: Vec<f64> = n.gates.iter().map(|g| table.weight(g.kind)).collect();
    AreaReport {
        gate_equivalents: per_gate.iter().sum(),
        table,
        per_gate,
    }
}

/// Per-gate output activity over an ordered stimulus sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub rows: usize,
    /// Output flips between consecutive rows.
    pub toggles: Vec<u64>,
    /// Rows on which the output was 1.
    pub ones: Vec<u64>,
}

impl ActivityProfile {
    /// Fraction of consecutive row pairs on which gate `g` flipped.
    pub fn toggle_rate(&self, g: usize) -> f64 {
        if self.rows < 2 {
            0.0
        } else {
            self.toggles[g] as f64 / (self.rows - 1) as f64
        }
    }

    /// The constant output value, if gate `g` never varied.
    pub fn stuck_value(&self, g: usize) -> Option<bool> {
        (self.toggles[g] == 0).then_some(self.ones[g] > 0)
    }

    /// Majority output value; ties go to 0.
    pub fn majority(&self, g: usize) -> bool {
        2 * self.ones[g] > self.rows as u64
    }

    pub fn len(&self) -> usize {
        self.toggles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.toggles.is_empty()
    }
}

#[derive(Clone, Copy, Default)]
struct LaneStats {
    toggles: u64,
    ones: u64,
    first: bool,
    last: bool,
}

/// Simulates the stimulus and counts per-gate toggles. Chunk statistics are
/// merged in row order, so the result does not depend on scheduling.
pub fn profile_activity(n: &Netlist, stim: &PackedStimulus) -> ActivityProfile {
    let values = stim.evaluate(n, &[]);
    let per_chunk: Vec<Vec<LaneStats>> = values
        .chunks()
        .par_iter()
        .enumerate()
        .map(|(c, lanes)| {
            let mask = stim.valid_mask(c);
            let rows = mask.count_ones();
            let pair_mask = mask >> 1;
            n.gates
                .iter()
                .map(|g| {
                    let v = lanes[g.output as usize] & mask;
                    LaneStats {
                        toggles: ((v ^ (v >> 1)) & pair_mask).count_ones() as u64,
                        ones: v.count_ones() as u64,
                        first: v & 1 == 1,
                        last: (v >> (rows - 1)) & 1 == 1,
                    }
                })
                .collect()
        })
        .collect();
    let mut toggles = vec![0u64; n.gates.len()];
    let mut ones = vec![0u64; n.gates.len()];
    for g in 0..n.gates.len() {
        let mut prev_last: Option<bool> = None;
        for chunk in &per_chunk {
            let s = chunk[g];
            toggles[g] += s.toggles;
            ones[g] += s.ones;
            if let Some(last) = prev_last {
                toggles[g] += (last != s.first) as u64;
            }
            prev_last = Some(s.last);
        }
    }
    ActivityProfile {
        rows: stim.rows(),
        toggles,
        ones,
    }
}

/// `Σ weight·toggle_rate + static_coeff · gate_equivalents`.
pub fn power_proxy(a: &AreaReport, act: &ActivityProfile, static_coeff: f64) -> f64 {
    assert_eq!(
        a.per_gate.len(),
        act.len(),
        "area and activity must describe one netlist"
    );
    let dynamic: f64 = a.per_gate.iter().enumerate().map(|(g, w)| w * act.toggle_rate(g)).sum();
    dynamic + static_coeff * a.gate_equivalents
}
