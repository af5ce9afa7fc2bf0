//! Two-valued, bit-parallel simulation. Rows are packed 64 to a word, one
//! word per net, and chunks of 64 rows are evaluated independently.

use rayon::prelude::*;

use super::{GateKind, Netlist, Port};
use crate::error::{Error, Result};

/// Input rows packed into per-net lanes.
#[derive(Debug, Clone)]
pub struct PackedStimulus {
    rows: usize,
    /// `chunks[c][bit]` holds primary-input bit `bit` for rows `64c..64c+64`.
    chunks: Vec<Vec<u64>>,
}

impl PackedStimulus {
    /// `rows[r]` holds one value per input port, in port order.
    pub fn new(n: &Netlist, rows: &[Vec<u64>]) -> Result<Self> {
        let bits = n.input_bits();
        let mut chunks = vec![vec![0u64; bits]; rows.len().div_ceil(64)];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n.inputs.len() {
                return Err(Error::Stimulus(format!(
                    "row {r} has {} values for {} input ports",
                    row.len(),
                    n.inputs.len()
                )));
            }
            let lanes = &mut chunks[r / 64];
            let lane = 1u64 << (r % 64);
            let mut bit = 0;
            for (port, &value) in n.inputs.iter().zip(row) {
                let w = port.width();
                if w < 64 && value >> w != 0 {
                    return Err(Error::Stimulus(format!(
                        "value {value} does not fit {w}-bit input `{}`",
                        port.name
                    )));
                }
                for i in 0..w {
                    if (value >> i) & 1 == 1 {
                        lanes[bit + i] |= lane;
                    }
                }
                bit += w;
            }
        }
        Ok(PackedStimulus {
            rows: rows.len(),
            chunks,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    /// Mask of rows present in chunk `c`.
    pub fn valid_mask(&self, c: usize) -> u64 {
        let n = (self.rows - 64 * c).min(64);
        if n == 64 {
            u64::MAX
        } else {
            (1u64 << n) - 1
        }
    }

    /// Evaluates every net. `forced[g]`, when present and `Some`, overrides
    /// gate `g`'s output with a constant.
    pub fn evaluate(&self, n: &Netlist, forced: &[Option<bool>]) -> SimValues {
        let chunks = self.chunks.par_iter().map(|pis| eval_chunk(n, pis, forced)).collect();
        SimValues {
            rows: self.rows,
            chunks,
        }
    }
}

fn eval_chunk(n: &Netlist, pis: &[u64], forced: &[Option<bool>]) -> Vec<u64> {
    let mut v = vec![0u64; n.net_count];
    v[..pis.len()].copy_from_slice(pis);
    for (g, gate) in n.gates.iter().enumerate() {
        let i = &gate.inputs;
        let value = match forced.get(g).copied().flatten() {
            Some(c) => {
                if c {
                    u64::MAX
                } else {
                    0
                }
            }
            None => match gate.kind {
                GateKind::Const0 => 0,
                GateKind::Const1 => u64::MAX,
                GateKind::Not => !v[i[0] as usize],
                GateKind::And2 => v[i[0] as usize] & v[i[1] as usize],
                GateKind::Or2 => v[i[0] as usize] | v[i[1] as usize],
                GateKind::Nand2 => !(v[i[0] as usize] & v[i[1] as usize]),
                GateKind::Nor2 => !(v[i[0] as usize] | v[i[1] as usize]),
                GateKind::Xor2 => v[i[0] as usize] ^ v[i[1] as usize],
                GateKind::Xnor2 => !(v[i[0] as usize] ^ v[i[1] as usize]),
                GateKind::Mux2 => {
                    let s = v[i[0] as usize];
                    (v[i[2] as usize] & s) | (v[i[1] as usize] & !s)
                }
            },
        };
        v[gate.output as usize] = value;
    }
    v
}

/// Net values for every simulated row.
#[derive(Debug, Clone)]
pub struct SimValues {
    rows: usize,
    chunks: Vec<Vec<u64>>,
}

impl SimValues {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn chunks(&self) -> &[Vec<u64>] {
        &self.chunks
    }

    /// Per-row integer value of a port (bit 0 = first net).
    pub fn port_values(&self, port: &Port) -> Vec<u64> {
        (0..self.rows)
            .map(|r| {
                let lanes = &self.chunks[r / 64];
                let shift = r % 64;
                port.nets
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &net)| acc | (((lanes[net as usize] >> shift) & 1) << i))
            })
            .collect()
    }
}

/// Evaluates many rows; each row lists one value per input port in port
/// order, and the result lists one value per output port.
pub fn simulate_rows(n: &Netlist, rows: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    let stim = PackedStimulus::new(n, rows)?;
    let values = stim.evaluate(n, &[]);
    let per_port: Vec<Vec<u64>> = n.outputs.iter().map(|p| values.port_values(p)).collect();
    Ok((0..rows.len())
        .map(|r| per_port.iter().map(|col| col[r]).collect())
        .collect())
}

/// Evaluates a single input assignment given by port name.
pub fn simulate(n: &Netlist, inputs: &[(&str, u64)]) -> Result<Vec<(String, u64)>> {
    let row = n
        .inputs
        .iter()
        .map(|p| {
            let mut hits = inputs.iter().filter(|(name, _)| *name == p.name);
            match (hits.next(), hits.next()) {
                (Some(&(_, v)), None) => Ok(v),
                (None, _) => Err(Error::Stimulus(format!("missing input `{}`", p.name))),
                _ => Err(Error::Stimulus(format!("input `{}` given twice", p.name))),
            }
        })
        .collect::<Result<Vec<u64>>>()?;
    if let Some((name, _)) = inputs
        .iter()
        .find(|(name, _)| !n.inputs.iter().any(|p| p.name == *name))
    {
        return Err(Error::Stimulus(format!("unknown input `{name}`")));
    }
    let out = simulate_rows(n, &[row])?;
    Ok(n.outputs
        .iter()
        .zip(&out[0])
        .map(|(p, &v)| (p.name.clone(), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Builder;

    #[test]
    fn const_and_not() {
        let mut b = Builder::new("c");
        let x = b.input("x", 1);
        let one = b.constant(true);
        let nx = b.not(x[0]);
        b.output("one", vec![one]);
        b.output("nx", vec![nx]);
        let n = b.finish();
        for v in 0..2 {
            let out = simulate(&n, &[("x", v)]).unwrap();
            assert_eq!(out, vec![("one".into(), 1), ("nx".into(), 1 - v)]);
        }
    }

    #[test]
    fn input_errors() {
        let mut b = Builder::new("c");
        let x = b.input("x", 2);
        b.output("y", x);
        let n = b.finish();
        assert!(simulate(&n, &[]).is_err());
        assert!(simulate(&n, &[("x", 4)]).is_err());
        assert!(simulate(&n, &[("x", 1), ("z", 0)]).is_err());
        assert_eq!(simulate(&n, &[("x", 3)]).unwrap()[0].1, 3);
    }

    #[test]
    fn rows_cross_chunk_boundaries() {
        let mut b = Builder::new("c");
        let x = b.input("x", 3);
        let y = b.xor(x[0], x[2]);
        b.output("y", vec![y]);
        let n = b.finish();
        let rows: Vec<Vec<u64>> = (0..150).map(|r| vec![(r * 5 % 8) as u64]).collect();
        let out = simulate_rows(&n, &rows).unwrap();
        for (row, o) in rows.iter().zip(&out) {
            assert_eq!(o[0], (row[0] & 1) ^ (row[0] >> 2));
        }
    }
}
