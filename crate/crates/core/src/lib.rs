//! Bespoke gate-level synthesis and hardware-aware approximation of small
//! ML classifiers (MLP, linear SVM, decision tree).
//!
//! The flow: load a trained model ([`model`]), quantize it to fixed point
//! ([`fxp`]), synthesize a combinational netlist with every coefficient
//! hardwired ([`synth`], [`netlist`]), then shrink it with coefficient
//! replacement ([`approx`]), gate-level pruning ([`prune`]) or an NSGA-II
//! search over comparator configurations ([`evolve`]). [`flow`] ties the
//! stages together and produces reports.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod evolve;
pub mod flow;
pub mod fxp;
pub mod model;
pub mod netlist;
pub mod prune;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
