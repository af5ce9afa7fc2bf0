//! Fixed-point formats, model quantization and the bit-exact software
//! reference for inference. Every synthesized netlist must agree with
//! [`QuantizedModel::infer_codes`] on every input.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax_by, Activation, Dataset, ModelBody, ModelKind, TrainedModel, TreeNode};

/// Two's complement when `signed`. Stored integers are `i64`, so formats are
/// limited to 62 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FxpFormat {
    pub total_bits: u32,
    pub fraction_bits: u32,
    pub signed: bool,
}

impl FxpFormat {
    pub fn new(total_bits: u32, fraction_bits: u32, signed: bool) -> Result<Self> {
        if !(1..=62).contains(&total_bits) {
            return Err(Error::InvalidArgument(format!(
                "format width {total_bits} not in 1..=62"
            )));
        }
        if fraction_bits + signed as u32 > total_bits {
            return Err(Error::InvalidArgument(format!(
                "{fraction_bits} fraction bits do not fit a {total_bits}-bit {} format",
                if signed { "signed" } else { "unsigned" }
            )));
        }
        Ok(FxpFormat {
            total_bits,
            fraction_bits,
            signed,
        })
    }

    pub fn min_code(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.total_bits - 1))
        } else {
            0
        }
    }

    pub fn max_code(&self) -> i64 {
        if self.signed {
            (1i64 << (self.total_bits - 1)) - 1
        } else {
            (1i64 << self.total_bits) - 1
        }
    }

    pub fn dequantize(&self, code: i64) -> f64 {
        code as f64 / (1u64 << self.fraction_bits) as f64
    }

    /// Largest representable real value.
    pub fn max_value(&self) -> f64 {
        self.dequantize(self.max_code())
    }
}

/// Round-to-nearest-even of `x · 2^fraction_bits`, saturated to the format.
/// NaN maps to zero.
pub fn quantize_value(x: f64, fmt: FxpFormat) -> i64 {
    let scaled = (x * (1u64 << fmt.fraction_bits) as f64).round_ties_even();
    if scaled.is_nan() {
        return 0;
    }
    let (lo, hi) = (fmt.min_code(), fmt.max_code());
    if scaled <= lo as f64 {
        lo
    } else if scaled >= hi as f64 {
        hi
    } else {
        scaled as i64
    }
}

/// Per-feature affine map from raw units onto `[0, input_format.max_value()]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub min: f64,
    /// Zero for a degenerate (constant) feature.
    pub scale: f64,
}

impl InputScaler {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.min) * self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantLayer {
    /// `weights[o][i]`, codes in the weight format.
    pub weights: Vec<Vec<i64>>,
    /// Codes with `acc_fraction` fraction bits.
    pub bias: Vec<i64>,
    pub relu: bool,
    /// Power-of-two gain applied to the layer's real weights before coding,
    /// picked so the largest weight uses the full weight format.
    pub scale_exp: i32,
    /// Fraction bits of this layer's accumulator: the incoming activation's
    /// fraction bits plus the weight fraction bits plus `scale_exp`.
    pub acc_fraction: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantBinary {
    pub weights: Vec<i64>,
    pub bias: i64,
    pub positive: usize,
    pub negative: usize,
    pub scale_exp: i32,
    pub acc_fraction: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantNode {
    /// Goes right iff the top `bits` of the feature code are `>=` the top
    /// `bits` of `threshold`.
    Internal {
        feature: usize,
        threshold: i64,
        bits: u32,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantBody {
    Mlp(Vec<QuantLayer>),
    Svm(Vec<QuantBinary>),
    Tree(Vec<QuantNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub kind: ModelKind,
    pub inputs: usize,
    pub classes: usize,
    pub input_format: FxpFormat,
    pub weight_format: FxpFormat,
    pub scalers: Vec<InputScaler>,
    /// Features whose training range is a single point; their scaler maps
    /// every value to code 0.
    pub degenerate_features: Vec<usize>,
    pub body: QuantBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub label: usize,
    /// Final accumulators (MLP outputs, SVM classifier sums); empty for trees.
    pub raw_outputs: Vec<i64>,
}

/// Bias codes are held to 48 bits.
const BIAS_LIMIT: f64 = (1u64 << 47) as f64;

fn quantize_bias(b: f64, fraction: i32) -> i64 {
    let v = (b * 2f64.powi(fraction)).round_ties_even();
    v.clamp(-BIAS_LIMIT, BIAS_LIMIT - 1.0) as i64
}

/// Largest `e` such that `max_abs · 2^e` still codes into `fmt` without
/// saturating.
fn scale_exponent(max_abs: f64, fmt: FxpFormat) -> i32 {
    if max_abs == 0.0 {
        return 0;
    }
    let limit = fmt.max_code() as f64 + 0.5;
    let unit = max_abs * (1u64 << fmt.fraction_bits) as f64;
    let mut e = (limit / unit).log2().floor() as i32;
    while unit * 2f64.powi(e) >= limit {
        e -= 1;
    }
    while unit * 2f64.powi(e + 1) < limit {
        e += 1;
    }
    e
}

pub fn quantize_model(
    m: &TrainedModel,
    input_format: FxpFormat,
    weight_format: FxpFormat,
    train: &Dataset,
) -> Result<QuantizedModel> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if train.inputs() != m.inputs {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} features, model expects {}",
            train.inputs(),
            m.inputs
        )));
    }
    if !weight_format.signed {
        return Err(Error::InvalidArgument("weight format must be signed".into()));
    }
    let top = input_format.max_value();
    let mut degenerate = Vec::new();
    let scalers: Vec<InputScaler> = train
        .ranges
        .iter()
        .enumerate()
        .map(|(f, &(lo, hi))| {
            if hi > lo {
                InputScaler {
                    min: lo,
                    scale: top / (hi - lo),
                }
            } else {
                degenerate.push(f);
                InputScaler { min: lo, scale: 0.0 }
            }
        })
        .collect();

    // A first-layer weight `w` on raw `x = min + s/scale` becomes `w/scale`
    // on the scaled input `s`, plus `w·min` into the bias.
    let fold = |weights: &[f64], bias: f64| -> (Vec<f64>, f64) {
        let mut b = bias;
        let w = weights
            .iter()
            .zip(&scalers)
            .map(|(&w, s)| {
                b += w * s.min;
                if s.scale == 0.0 {
                    0.0
                } else {
                    w / s.scale
                }
            })
            .collect();
        (w, b)
    };
    let in_frac = input_format.fraction_bits as i32;
    let w_frac = weight_format.fraction_bits as i32;

    let body = match &m.body {
        ModelBody::Mlp(mlp) => {
            let mut frac = in_frac;
            let mut layers = Vec::with_capacity(mlp.layers.len());
            for (l, layer) in mlp.layers.iter().enumerate() {
                let (rows, bias): (Vec<Vec<f64>>, Vec<f64>) = if l == 0 {
                    layer.weights.iter().zip(&layer.bias).map(|(w, &b)| fold(w, b)).unzip()
                } else {
                    (layer.weights.clone(), layer.bias.clone())
                };
                let max_abs = rows.iter().flatten().fold(0f64, |a, w| a.max(w.abs()));
                let e = scale_exponent(max_abs, weight_format);
                let gain = 2f64.powi(e);
                let acc_fraction = frac + w_frac + e;
                layers.push(QuantLayer {
                    weights: rows
                        .iter()
                        .map(|r| r.iter().map(|&w| quantize_value(w * gain, weight_format)).collect())
                        .collect(),
                    bias: bias.iter().map(|&b| quantize_bias(b, acc_fraction)).collect(),
                    relu: layer.activation == Activation::Relu,
                    scale_exp: e,
                    acc_fraction,
                });
                frac = acc_fraction;
            }
            QuantBody::Mlp(layers)
        }
        ModelBody::Svm(svm) => QuantBody::Svm(
            svm.classifiers
                .iter()
                .map(|c| {
                    let (w, b) = fold(&c.weights, c.bias);
                    let max_abs = w.iter().fold(0f64, |a, w| a.max(w.abs()));
                    let e = scale_exponent(max_abs, weight_format);
                    let gain = 2f64.powi(e);
                    let acc_fraction = in_frac + w_frac + e;
                    QuantBinary {
                        weights: w.iter().map(|&w| quantize_value(w * gain, weight_format)).collect(),
                        bias: quantize_bias(b, acc_fraction),
                        positive: c.positive,
                        negative: c.negative,
                        scale_exp: e,
                        acc_fraction,
                    }
                })
                .collect(),
        ),
        ModelBody::Tree(tree) => QuantBody::Tree(
            tree.nodes
                .iter()
                .map(|n| match *n {
                    TreeNode::Leaf { class, .. } => QuantNode::Leaf { class },
                    TreeNode::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                        ..
                    } => {
                        let s = scalers[feature];
                        let code = if s.scale == 0.0 {
                            // The feature is always code 0: keep the branch
                            // the raw comparison would take.
                            if s.min >= threshold {
                                0
                            } else {
                                input_format.max_code()
                            }
                        } else {
                            quantize_value(s.apply(threshold), input_format)
                        };
                        QuantNode::Internal {
                            feature,
                            threshold: code,
                            bits: input_format.total_bits,
                            left,
                            right,
                        }
                    }
                })
                .collect(),
        ),
    };

    Ok(QuantizedModel {
        kind: m.kind,
        inputs: m.inputs,
        classes: m.classes,
        input_format,
        weight_format,
        scalers,
        degenerate_features: degenerate,
        body,
    })
}

impl QuantizedModel {
    pub fn quantize_inputs(&self, row: &[f64]) -> Vec<i64> {
        row.iter()
            .zip(&self.scalers)
            .map(|(&x, s)| quantize_value(s.apply(x), self.input_format))
            .collect()
    }

    pub fn infer(&self, row: &[f64]) -> Prediction {
        assert_eq!(row.len(), self.inputs, "row length must match model inputs");
        self.infer_codes(&self.quantize_inputs(row))
    }

    /// Inference on already-quantized input codes.
    pub fn infer_codes(&self, codes: &[i64]) -> Prediction {
        match &self.body {
            QuantBody::Mlp(layers) => {
                let mut act = codes.to_vec();
                for layer in layers {
                    act = layer
                        .weights
                        .iter()
                        .zip(&layer.bias)
                        .map(|(w, &b)| {
                            let acc = dot(w, &act) + b;
                            if layer.relu {
                                acc.max(0)
                            } else {
                                acc
                            }
                        })
                        .collect();
                }
                let label = if self.kind == ModelKind::MlpRegressor {
                    let frac = layers.last().map_or(0, |l| l.acc_fraction);
                    regressor_label(act[0], frac, self.classes)
                } else {
                    argmax_by(&act)
                };
                Prediction {
                    label,
                    raw_outputs: act,
                }
            }
            QuantBody::Svm(classifiers) => {
                let mut votes = vec![0u32; self.classes];
                let raw: Vec<i64> = classifiers
                    .iter()
                    .map(|c| {
                        let acc = dot(&c.weights, codes) + c.bias;
                        votes[if acc >= 0 { c.positive } else { c.negative }] += 1;
                        acc
                    })
                    .collect();
                Prediction {
                    label: argmax_by(&votes),
                    raw_outputs: raw,
                }
            }
            QuantBody::Tree(nodes) => {
                let full = self.input_format.total_bits;
                let mut i = 0;
                let label = loop {
                    match nodes[i] {
                        QuantNode::Leaf { class } => break class,
                        QuantNode::Internal {
                            feature,
                            threshold,
                            bits,
                            left,
                            right,
                        } => {
                            let shift = full - bits;
                            i = if codes[feature] >> shift >= threshold >> shift {
                                right
                            } else {
                                left
                            };
                        }
                    }
                };
                Prediction {
                    label,
                    raw_outputs: Vec::new(),
                }
            }
        }
    }

    /// Number of tree comparators (internal nodes); zero for other kinds.
    pub fn comparator_count(&self) -> usize {
        match &self.body {
            QuantBody::Tree(nodes) => nodes.iter().filter(|n| matches!(n, QuantNode::Internal { .. })).count(),
            _ => 0,
        }
    }
}

fn dot(w: &[i64], x: &[i64]) -> i64 {
    w.iter().zip(x).map(|(w, x)| w * x).sum()
}

/// `clamp(round_half_up(acc / 2^frac), 0, classes - 1)`.
pub fn regressor_label(acc: i64, frac: i32, classes: usize) -> usize {
    let r = if frac > 0 {
        (acc + (1i64 << (frac - 1))) >> frac
    } else {
        acc << -frac
    };
    r.clamp(0, classes as i64 - 1) as usize
}

pub fn accuracy(q: &QuantizedModel, data: &Dataset) -> f64 {
    let hits: usize = data
        .features
        .par_iter()
        .zip(&data.labels)
        .map(|(row, &label)| (q.infer(row).label == label) as usize)
        .sum();
    hits as f64 / data.len() as f64
}
