//! Coefficient approximation for weighted sums: each weight may move to a
//! cheaper nearby code, and within one neuron (or binary classifier) the
//! signed deviations are steered so they cancel.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{accuracy, QuantBody, QuantizedModel};
use crate::model::Dataset;
use crate::netlist::area;
use crate::synth::{synth_const_mult, word::width_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub value: i64,
    pub mult_area: f64,
}

/// Replacement options for one weight, cheapest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub original: i64,
    pub window: i64,
    /// Sorted by `(mult_area, |value - original|, value)`. Holds the
    /// original plus every code within the window whose multiplier is
    /// strictly smaller.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn original_area(&self) -> f64 {
        self.candidates
            .iter()
            .find(|c| c.value == self.original)
            .map(|c| c.mult_area)
            .expect("original is always a candidate")
    }

    /// Area saved by the cheapest candidate.
    pub fn potential_saving(&self) -> f64 {
        self.original_area() - self.candidates[0].mult_area
    }
}

/// Multiplier areas memoized by `(|coefficient|, input bits)`. Inside a
/// weighted sum the sign of a product is absorbed by the adder tree, so a
/// coefficient costs what its magnitude costs.
#[derive(Debug, Default)]
pub struct MultAreaCache {
    areas: Mutex<HashMap<(i64, usize), f64>>,
}

impl MultAreaCache {
    pub fn area(&self, c: i64, in_bits: usize) -> f64 {
        let key = (c.abs(), in_bits);
        if let Some(&a) = self.areas.lock().unwrap().get(&key) {
            return a;
        }
        let a = area(&synth_const_mult(key.0, in_bits, false).netlist).gate_equivalents;
        self.areas.lock().unwrap().insert(key, a);
        a
    }
}

/// Candidate set for a weight code `w` multiplying an unsigned
/// `in_bits`-wide operand. `code_range` bounds the replacement codes.
pub fn candidate_set_in(
    cache: &MultAreaCache,
    w: i64,
    delta: i64,
    in_bits: usize,
    code_range: (i64, i64),
) -> CandidateSet {
    let original_area = cache.area(w, in_bits);
    let lo = (w - delta).max(code_range.0);
    let hi = (w + delta).min(code_range.1);
    let mut candidates: Vec<Candidate> = (lo..=hi)
        .filter_map(|v| {
            let mult_area = if v == w { original_area } else { cache.area(v, in_bits) };
            (v == w || mult_area < original_area).then_some(Candidate { value: v, mult_area })
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.mult_area
            .total_cmp(&b.mult_area)
            .then((a.value - w).abs().cmp(&(b.value - w).abs()))
            .then(a.value.cmp(&b.value))
    });
    CandidateSet {
        original: w,
        window: delta,
        candidates,
    }
}

/// [`candidate_set_in`] with an unbounded code range and a private cache.
pub fn candidate_set(w: i64, delta: i64, in_bits: usize) -> CandidateSet {
    candidate_set_in(
        &MultAreaCache::default(),
        w,
        delta.max(0),
        in_bits,
        (i64::MIN / 4, i64::MAX / 4),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub position: usize,
    pub original: i64,
    pub chosen: i64,
}

/// One greedy step, in visiting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adoption {
    pub position: usize,
    pub deviation: i64,
    pub error_before: i64,
    pub error_after: i64,
}

/// Decisions for one weighted sum: a neuron `(layer, neuron)` of an MLP or
/// binary classifier `(0, index)` of an SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumPlan {
    pub layer: usize,
    pub neuron: usize,
    pub replacements: Vec<Replacement>,
    /// Σ (chosen − original) over the sum's weights.
    pub neuron_error: i64,
    pub error_budget: i64,
    pub trace: Vec<Adoption>,
    pub area_before: f64,
    pub area_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementPlan {
    /// Window actually used after any halving.
    pub delta: i64,
    pub requested_delta: i64,
    pub train_accuracy_before: f64,
    pub train_accuracy_after: f64,
    pub sums: Vec<SumPlan>,
}

impl ReplacementPlan {
    pub fn mult_area_before(&self) -> f64 {
        self.sums.iter().map(|s| s.area_before).sum()
    }

    pub fn mult_area_after(&self) -> f64 {
        self.sums.iter().map(|s| s.area_after).sum()
    }

    pub fn changed_weights(&self) -> usize {
        self.sums.iter().map(|s| s.replacements.len()).sum()
    }
}

/// Greedy sign-alternating selection over one weight vector. `in_bits[i]`
/// is the operand width seen by weight `i`.
pub fn plan_sum(
    cache: &MultAreaCache,
    weights: &[i64],
    in_bits: &[usize],
    delta: i64,
    code_range: (i64, i64),
) -> (Vec<i64>, Vec<Adoption>, f64, f64) {
    let sets: Vec<CandidateSet> = weights
        .iter()
        .zip(in_bits)
        .map(|(&w, &b)| candidate_set_in(cache, w, delta, b, code_range))
        .collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        sets[b]
            .potential_saving()
            .total_cmp(&sets[a].potential_saving())
            .then(a.cmp(&b))
    });

    let budget = delta;
    let mut error = 0i64;
    let mut chosen = weights.to_vec();
    let mut trace = Vec::new();
    for i in order {
        let set = &sets[i];
        let pick = set
            .candidates
            .iter()
            .find(|c| {
                let d = c.value - set.original;
                (error + d).abs() <= budget && (error == 0 || d == 0 || d.signum() != error.signum())
            })
            .expect("the original always fits");
        let d = pick.value - set.original;
        trace.push(Adoption {
            position: i,
            deviation: d,
            error_before: error,
            error_after: error + d,
        });
        error += d;
        chosen[i] = pick.value;
    }
    let before = sets.iter().map(|s| s.original_area()).sum();
    let after = sets
        .iter()
        .zip(&chosen)
        .map(|(s, &v)| s.candidates.iter().find(|c| c.value == v).unwrap().mult_area)
        .sum();
    (chosen, trace, before, after)
}

/// Operand widths for every weighted sum, from interval analysis of the
/// unapproximated model. Indexed `[layer][input]`.
fn operand_widths(q: &QuantizedModel) -> Vec<Vec<usize>> {
    let in_bits = q.input_format.total_bits as usize;
    match &q.body {
        QuantBody::Mlp(layers) => {
            let top = q.input_format.max_code();
            let mut ranges = vec![(0i64, top); q.inputs];
            let mut out = Vec::new();
            for layer in layers {
                out.push(ranges.iter().map(|&(lo, hi)| width_for(lo, hi).min(32)).collect());
                ranges = layer
                    .weights
                    .iter()
                    .zip(&layer.bias)
                    .map(|(w, &b)| {
                        let (mut lo, mut hi) = (b, b);
                        for (&w, &(l, h)) in w.iter().zip(&ranges) {
                            lo += (w * l).min(w * h);
                            hi += (w * l).max(w * h);
                        }
                        if layer.relu {
                            (lo.max(0), hi.max(0))
                        } else {
                            (lo, hi)
                        }
                    })
                    .collect();
            }
            out
        }
        _ => vec![vec![in_bits; q.inputs]],
    }
}

fn plan_all(q: &QuantizedModel, delta: i64, cache: &MultAreaCache) -> (QuantizedModel, Vec<SumPlan>) {
    let widths = operand_widths(q);
    let range = (q.weight_format.min_code(), q.weight_format.max_code());
    let sums: Vec<(usize, usize, &[i64])> = match &q.body {
        QuantBody::Mlp(layers) => layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.weights.iter().enumerate().map(move |(j, w)| (l, j, w.as_slice())))
            .collect(),
        QuantBody::Svm(cs) => cs
            .iter()
            .enumerate()
            .map(|(j, c)| (0, j, c.weights.as_slice()))
            .collect(),
        QuantBody::Tree(_) => Vec::new(),
    };
    let plans: Vec<(SumPlan, Vec<i64>)> = sums
        .par_iter()
        .map(|&(layer, neuron, weights)| {
            let (chosen, trace, area_before, area_after) = plan_sum(cache, weights, &widths[layer], delta, range);
            let replacements = weights
                .iter()
                .zip(&chosen)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(position, (&original, &chosen))| Replacement {
                    position,
                    original,
                    chosen,
                })
                .collect();
            let plan = SumPlan {
                layer,
                neuron,
                replacements,
                neuron_error: chosen.iter().zip(weights).map(|(c, w)| c - w).sum(),
                error_budget: delta,
                trace,
                area_before,
                area_after,
            };
            (plan, chosen)
        })
        .collect();

    let mut out = q.clone();
    for (plan, chosen) in &plans {
        match &mut out.body {
            QuantBody::Mlp(layers) => layers[plan.layer].weights[plan.neuron] = chosen.clone(),
            QuantBody::Svm(cs) => cs[plan.neuron].weights = chosen.clone(),
            QuantBody::Tree(_) => unreachable!(),
        }
    }
    (out, plans.into_iter().map(|(p, _)| p).collect())
}

/// Approximates every weighted sum of an MLP or SVM. The window is halved
/// until the train-accuracy drop fits `budget_pp` percentage points; at a
/// window of 0 the model is returned unchanged.
pub fn approximate_sums(
    q: &QuantizedModel,
    train: &Dataset,
    delta: i64,
    budget_pp: f64,
) -> Result<(QuantizedModel, ReplacementPlan)> {
    if !q.kind.is_weighted_sum() {
        return Err(Error::KindMismatch {
            command: "approx".into(),
            kind: q.kind.name().into(),
        });
    }
    if delta < 0 || !(budget_pp >= 0.0) {
        return Err(Error::InvalidArgument(
            "delta and accuracy budget must be non-negative".into(),
        ));
    }
    let base = accuracy(q, train);
    let cache = MultAreaCache::default();
    let mut d = delta;
    loop {
        let (model, sums) = plan_all(q, d, &cache);
        let acc = accuracy(&model, train);
        if d == 0 || (base - acc) * 100.0 <= budget_pp + 1e-9 {
            let model = if d == 0 { q.clone() } else { model };
            log::info!("coefficient approximation: window {d}, train accuracy {base:.4} -> {acc:.4}");
            let plan = ReplacementPlan {
                delta: d,
                requested_delta: delta,
                train_accuracy_before: base,
                train_accuracy_after: if d == 0 { base } else { acc },
                sums,
            };
            return Ok((model, plan));
        }
        log::debug!("window {d} loses {:.2}pp on train, halving", (base - acc) * 100.0);
        d /= 2;
    }
}
