//! Bespoke circuit generators. Coefficients are constants of the circuit,
//! so every multiplier and comparator is specialized to its value and the
//! builder folds away whatever the constant makes redundant.

mod csd;
mod model;
pub mod word;

pub use csd::{to_csd, CsdForm};
pub use model::{
    check_equivalence, decode_signed, input_row, random_code_rows, synth_model, synth_model_with, Equivalence,
    SynthOptions, ACC_PORT_BITS,
};

use crate::netlist::{propagate, Builder, Netlist};
use word::{add_sub, ge_const, negate, Word};

/// A product `±word`; the sign is kept symbolic so it can be absorbed by a
/// later subtractor instead of a negator.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub word: Word,
    pub negative: bool,
}

fn combine(b: &mut Builder, x: Term, y: Term, stages: &mut usize) -> Term {
    *stages += 1;
    match (x.negative, y.negative) {
        (false, false) => Term {
            word: add_sub(b, &x.word, &y.word, false),
            negative: false,
        },
        (false, true) => Term {
            word: add_sub(b, &x.word, &y.word, true),
            negative: false,
        },
        (true, false) => Term {
            word: add_sub(b, &y.word, &x.word, true),
            negative: false,
        },
        (true, true) => Term {
            word: add_sub(b, &x.word, &y.word, false),
            negative: true,
        },
    }
}

/// Balanced pairwise reduction; `n` terms cost `n - 1` adder stages.
pub(crate) fn sum_terms(b: &mut Builder, mut terms: Vec<Term>, stages: &mut usize) -> Option<Term> {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some(x) = it.next() {
            match it.next() {
                Some(y) => next.push(combine(b, x, y, stages)),
                None => next.push(x),
            }
        }
        terms = next;
    }
    terms.pop()
}

/// `c · x` as shifted copies of `x`, one per nonzero CSD digit.
pub(crate) fn const_mult_term(b: &mut Builder, x: &Word, c: i64, stages: &mut usize) -> Option<Term> {
    let terms = to_csd(c)
        .terms()
        .map(|(pos, d)| Term {
            word: x.shl(b, pos),
            negative: d < 0,
        })
        .collect();
    sum_terms(b, terms, stages)
}

pub(crate) fn resolve(b: &mut Builder, t: Option<Term>) -> Word {
    match t {
        None => Word::constant(b, 0),
        Some(Term { word, negative: false }) => word,
        Some(Term { word, negative: true }) => negate(b, &word),
    }
}

/// A standalone constant multiplier.
#[derive(Debug, Clone)]
pub struct ConstMult {
    /// Input `x` (`in_bits` wide), output `p` (two's complement when the
    /// product can be negative).
    pub netlist: Netlist,
    pub adder_stages: usize,
    /// 1 when every CSD digit is negative and the result needs a final
    /// negation.
    pub negators: usize,
    pub product_signed: bool,
}

pub fn synth_const_mult(c: i64, in_bits: usize, in_signed: bool) -> ConstMult {
    assert!((1..=32).contains(&in_bits));
    let mut b = Builder::new(format!("mult_{}", c).replace('-', "m"));
    let bits = b.input("x", in_bits);
    let x = if in_signed {
        let half = 1i64 << (in_bits - 1);
        Word {
            bits,
            lo: -half,
            hi: half - 1,
        }
    } else {
        Word::input(bits)
    };
    let mut stages = 0;
    let term = const_mult_term(&mut b, &x, c, &mut stages);
    let negators = term.as_ref().map_or(0, |t| t.negative as usize);
    let product = resolve(&mut b, term);
    let (p1, p2) = (c * x.lo, c * x.hi);
    let (lo, hi) = (p1.min(p2).min(0), p1.max(p2).max(0));
    let out = Word {
        bits: product.resized(&mut b, word::width_for(lo, hi)),
        lo,
        hi,
    };
    b.output("p", out.bits.clone());
    ConstMult {
        netlist: propagate(&b.finish(), &[]),
        adder_stages: stages,
        negators,
        product_signed: out.is_signed(),
    }
}

/// `[x >= t]` for an unsigned `in_bits`-wide input: input `x`, output `ge`.
pub fn synth_comparator(t: u64, in_bits: usize) -> Netlist {
    assert!((1..=32).contains(&in_bits) && t >> in_bits == 0);
    let mut b = Builder::new(format!("cmp_ge_{t}"));
    let x = b.input("x", in_bits);
    let ge = ge_const(&mut b, &x, t);
    b.output("ge", vec![ge]);
    propagate(&b.finish(), &[])
}
