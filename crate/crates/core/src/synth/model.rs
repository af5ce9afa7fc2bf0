//! Whole-classifier synthesis from a [`QuantizedModel`].
//!
//! Ports: one unsigned input `x{i}` per feature, `input_format.total_bits`
//! wide, and the predicted class on `label`.

use crate::fxp::{QuantBody, QuantNode, QuantizedModel};
use crate::model::ModelKind;
use crate::netlist::{propagate, Builder, NetId, Netlist};

use super::word::{ge_const, less_than, relu, select, width_for, Word};
use super::{const_mult_term, resolve, sum_terms, Term};

/// Width of the optional `acc{j}` debug ports (sign-extended accumulators).
pub const ACC_PORT_BITS: usize = 56;

#[derive(Debug, Clone, Copy, Default)]
pub struct SynthOptions {
    /// Also drive the final accumulators (MLP outputs, SVM sums) on ports
    /// `acc0, acc1, ...`.
    pub expose_accumulators: bool,
}

pub fn synth_model(q: &QuantizedModel) -> Netlist {
    synth_model_with(q, SynthOptions::default())
}

/// Netlist input row for a vector of input codes.
pub fn input_row(codes: &[i64]) -> Vec<u64> {
    codes.iter().map(|&c| c as u64).collect()
}

/// Interprets the low `w` bits of `v` as a (possibly signed) integer.
pub fn decode_signed(v: u64, w: usize, signed: bool) -> i64 {
    if signed && w < 64 && (v >> (w - 1)) & 1 == 1 {
        v as i64 - (1i64 << w)
    } else {
        v as i64
    }
}

pub fn synth_model_with(q: &QuantizedModel, opts: SynthOptions) -> Netlist {
    let mut b = Builder::new(format!("bespoke_{}", q.kind.name()));
    let in_bits = q.input_format.total_bits as usize;
    let xs: Vec<Word> = (0..q.inputs)
        .map(|i| Word::input(b.input(format!("x{i}"), in_bits)))
        .collect();
    let label_bits = width_for(0, q.classes as i64 - 1);
    let mut accs = Vec::new();

    let label = match &q.body {
        QuantBody::Mlp(layers) => {
            let mut act = xs;
            for layer in layers {
                act = layer
                    .weights
                    .iter()
                    .zip(&layer.bias)
                    .map(|(w, &bias)| {
                        let acc = weighted_sum(&mut b, &act, w, bias);
                        if layer.relu {
                            relu(&mut b, &acc)
                        } else {
                            acc
                        }
                    })
                    .collect();
            }
            accs = act.clone();
            if q.kind == ModelKind::MlpRegressor {
                let frac = layers.last().map_or(0, |l| l.acc_fraction);
                regressor_label(&mut b, &act[0], frac, q.classes, label_bits)
            } else {
                argmax(&mut b, &act, label_bits)
            }
        }
        QuantBody::Svm(classifiers) => {
            let mut ballots: Vec<Vec<Term>> = vec![Vec::new(); q.classes];
            for c in classifiers {
                let acc = weighted_sum(&mut b, &xs, &c.weights, c.bias);
                let sign = acc.sign(&mut b);
                let pos = b.not(sign);
                ballots[c.positive].push(bit_term(pos));
                ballots[c.negative].push(bit_term(sign));
                accs.push(acc);
            }
            let counts: Vec<Word> = ballots
                .into_iter()
                .map(|t| {
                    let mut stages = 0;
                    let sum = sum_terms(&mut b, t, &mut stages);
                    resolve(&mut b, sum)
                })
                .collect();
            argmax(&mut b, &counts, label_bits)
        }
        QuantBody::Tree(nodes) => tree_label(&mut b, nodes, 0, &xs, in_bits, label_bits),
    };

    b.output("label", label);
    if opts.expose_accumulators {
        for (j, acc) in accs.iter().enumerate() {
            let bits = acc.resized(&mut b, ACC_PORT_BITS);
            b.output(format!("acc{j}"), bits);
        }
    }
    propagate(&b.finish(), &[])
}

fn bit_term(net: NetId) -> Term {
    Term {
        word: Word {
            bits: vec![net],
            lo: 0,
            hi: 1,
        },
        negative: false,
    }
}

/// `Σ w[i]·x[i] + bias`: one bespoke multiplier per nonzero weight, reduced
/// by a balanced adder tree with the bias as a constant operand.
fn weighted_sum(b: &mut Builder, xs: &[Word], weights: &[i64], bias: i64) -> Word {
    let mut stages = 0;
    let mut terms: Vec<Term> = xs
        .iter()
        .zip(weights)
        .filter_map(|(x, &w)| const_mult_term(b, x, w, &mut stages))
        .collect();
    if bias != 0 {
        terms.push(Term {
            word: Word::constant(b, bias),
            negative: false,
        });
    }
    let sum = sum_terms(b, terms, &mut stages);
    resolve(b, sum)
}

/// Index of the maximum; a later candidate wins only when strictly greater,
/// so ties resolve to the lowest index.
fn argmax(b: &mut Builder, values: &[Word], label_bits: usize) -> Vec<NetId> {
    fn reduce(b: &mut Builder, items: &[(Word, Word)]) -> (Word, Word) {
        if items.len() == 1 {
            return items[0].clone();
        }
        let mid = items.len() / 2;
        let (lv, li) = reduce(b, &items[..mid]);
        let (rv, ri) = reduce(b, &items[mid..]);
        let right_wins = less_than(b, &lv, &rv);
        (select(b, right_wins, &lv, &rv), select(b, right_wins, &li, &ri))
    }
    let items: Vec<(Word, Word)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), Word::constant(b, i as i64)))
        .collect();
    let (_, idx) = reduce(b, &items);
    idx.resized(b, label_bits)
}

/// `clamp(round_half_up(acc / 2^frac), 0, classes - 1)`.
fn regressor_label(b: &mut Builder, acc: &Word, frac: i32, classes: usize, label_bits: usize) -> Vec<NetId> {
    let r = if frac > 0 {
        let half = Word::constant(b, 1i64 << (frac - 1));
        let mut stages = 0;
        let terms = vec![
            Term {
                word: acc.clone(),
                negative: false,
            },
            Term {
                word: half,
                negative: false,
            },
        ];
        let sum = sum_terms(b, terms, &mut stages);
        let rounded = resolve(b, sum);
        rounded.shr(b, frac as u32)
    } else {
        acc.shl(b, (-frac) as u32)
    };
    let zero = Word::constant(b, 0);
    let top = Word::constant(b, classes as i64 - 1);
    let negative = less_than(b, &r, &zero);
    let too_big = less_than(b, &top, &r);
    let low = r.resized(b, label_bits);
    let top_bits = top.resized(b, label_bits);
    let zero_bit = b.constant(false);
    low.iter()
        .zip(&top_bits)
        .map(|(&l, &t)| {
            let capped = b.mux(too_big, l, t);
            b.mux(negative, capped, zero_bit)
        })
        .collect()
}

fn tree_label(
    b: &mut Builder,
    nodes: &[QuantNode],
    i: usize,
    xs: &[Word],
    in_bits: usize,
    label_bits: usize,
) -> Vec<NetId> {
    match nodes[i] {
        QuantNode::Leaf { class } => {
            let c = Word::constant(b, class as i64);
            c.resized(b, label_bits)
        }
        QuantNode::Internal {
            feature,
            threshold,
            bits,
            left,
            right,
        } => {
            let shift = in_bits - bits as usize;
            let go_right = ge_const(b, &xs[feature].bits[shift..], (threshold >> shift) as u64);
            let l = tree_label(b, nodes, left, xs, in_bits, label_bits);
            let r = tree_label(b, nodes, right, xs, in_bits, label_bits);
            l.iter().zip(&r).map(|(&l, &r)| b.mux(go_right, l, r)).collect()
        }
    }
}

/// Outcome of comparing a netlist against the software reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Equivalence {
    pub rows: usize,
    pub mismatches: usize,
}

impl Equivalence {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// `count` uniformly random input-code rows drawn from `rng`.
pub fn random_code_rows(q: &QuantizedModel, count: usize, rng: &mut impl rand::Rng) -> Vec<Vec<i64>> {
    let top = q.input_format.max_code();
    (0..count)
        .map(|_| (0..q.inputs).map(|_| rng.gen_range(0..=top)).collect())
        .collect()
}

/// Simulates `n` on every code row and compares its `label` port (and any
/// `acc{j}` ports) with [`QuantizedModel::infer_codes`].
pub fn check_equivalence(q: &QuantizedModel, n: &Netlist, code_rows: &[Vec<i64>]) -> crate::Result<Equivalence> {
    let rows: Vec<Vec<u64>> = code_rows.iter().map(|c| input_row(c)).collect();
    let outs = crate::netlist::simulate_rows(n, &rows)?;
    let label_port = n
        .output_index("label")
        .ok_or_else(|| crate::Error::InvalidNetlist("no `label` output".into()))?;
    let acc_ports: Vec<(usize, usize)> = n
        .outputs
        .iter()
        .enumerate()
        .filter_map(|(p, port)| Some((p, port.name.strip_prefix("acc")?.parse().ok()?)))
        .collect();
    let mismatches = code_rows
        .iter()
        .zip(&outs)
        .filter(|(codes, out)| {
            let want = q.infer_codes(codes);
            out[label_port] != want.label as u64
                || acc_ports
                    .iter()
                    .any(|&(p, j)| want.raw_outputs.get(j).copied() != Some(decode_signed(out[p], ACC_PORT_BITS, true)))
        })
        .count();
    Ok(Equivalence {
        rows: code_rows.len(),
        mismatches,
    })
}
