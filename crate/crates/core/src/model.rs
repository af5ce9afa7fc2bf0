//! Trained models and datasets as loaded from disk.
//!
//! Models are plain coefficient dumps in JSON; training happens elsewhere.
//! Datasets are CSV files whose last column is the integer class label.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    MlpClassifier,
    MlpRegressor,
    SvmClassifier,
    DecisionTree,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MlpClassifier => "mlp-classifier",
            ModelKind::MlpRegressor => "mlp-regressor",
            ModelKind::SvmClassifier => "svm-classifier",
            ModelKind::DecisionTree => "decision-tree",
        }
    }

    /// Models whose core is a weighted sum.
    pub fn is_weighted_sum(self) -> bool {
        !matches!(self, ModelKind::DecisionTree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

/// A dense layer. `weights[o][i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpBody {
    pub layers: Vec<Layer>,
}

/// One binary linear classifier of a one-vs-one ensemble. It votes for
/// `positive` when `w·x + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmBody {
    pub classifiers: Vec<BinaryClassifier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        id: usize,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        id: usize,
        class: usize,
    },
}

impl TreeNode {
    pub fn id(&self) -> usize {
        match *self {
            TreeNode::Internal { id, .. } | TreeNode::Leaf { id, .. } => id,
        }
    }
}

/// Binary tree stored in preorder; node `i` has id `i` and the root is node 0.
/// A sample goes right when `x[feature] >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeBody {
    pub nodes: Vec<TreeNode>,
}

impl TreeBody {
    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Internal { .. }))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Mlp(MlpBody),
    Svm(SvmBody),
    Tree(TreeBody),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub inputs: usize,
    pub classes: usize,
    pub body: ModelBody,
}

/// On-disk layout: exactly one of `mlp` / `svm` / `tree` is present.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: ModelKind,
    inputs: usize,
    classes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mlp: Option<MlpBody>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    svm: Option<SvmBody>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    tree: Option<TreeBody>,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainedModel::from_json(&text)
}

impl TrainedModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn to_json(&self) -> String {
        let mut file = ModelFile {
            kind: self.kind,
            inputs: self.inputs,
            classes: self.classes,
            mlp: None,
            svm: None,
            tree: None,
        };
        match &self.body {
            ModelBody::Mlp(b) => file.mlp = Some(b.clone()),
            ModelBody::Svm(b) => file.svm = Some(b.clone()),
            ModelBody::Tree(b) => file.tree = Some(b.clone()),
        }
        serde_json::to_string_pretty(&file).expect("model serialization is infallible")
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.inputs == 0 {
            return Err(Error::invalid_model("inputs", "must be positive"));
        }
        if file.classes < 2 {
            return Err(Error::invalid_model("classes", "must be at least 2"));
        }
        let present = [file.mlp.is_some(), file.svm.is_some(), file.tree.is_some()]
            .iter()
            .filter(|&&p| p)
            .count();
        if present != 1 {
            return Err(Error::invalid_model(
                "",
                "exactly one of `mlp`, `svm`, `tree` must be present",
            ));
        }
        let body = match (file.kind, file.mlp, file.svm, file.tree) {
            (ModelKind::MlpClassifier | ModelKind::MlpRegressor, Some(mlp), _, _) => {
                let out = if file.kind == ModelKind::MlpRegressor {
                    1
                } else {
                    file.classes
                };
                validate_mlp(&mlp, file.inputs, out)?;
                ModelBody::Mlp(mlp)
            }
            (ModelKind::SvmClassifier, _, Some(svm), _) => {
                validate_svm(&svm, file.inputs, file.classes)?;
                ModelBody::Svm(svm)
            }
            (ModelKind::DecisionTree, _, _, Some(tree)) => {
                ModelBody::Tree(normalize_tree(tree, file.inputs, file.classes)?)
            }
            (kind, ..) => {
                return Err(Error::invalid_model(
                    "kind",
                    format!("body does not match kind `{}`", kind.name()),
                ))
            }
        };
        Ok(TrainedModel {
            kind: file.kind,
            inputs: file.inputs,
            classes: file.classes,
            body,
        })
    }

    /// Floating-point reference inference on a raw feature row, using the
    /// same decision rules as the fixed-point engine.
    pub fn predict(&self, row: &[f64]) -> usize {
        match &self.body {
            ModelBody::Mlp(mlp) => {
                let mut act = row.to_vec();
                for layer in &mlp.layers {
                    act = layer
                        .weights
                        .iter()
                        .zip(&layer.bias)
                        .map(|(w, b)| {
                            let z = w.iter().zip(&act).map(|(w, x)| w * x).sum::<f64>() + b;
                            match layer.activation {
                                Activation::Relu => z.max(0.0),
                                Activation::None => z,
                            }
                        })
                        .collect();
                }
                if self.kind == ModelKind::MlpRegressor {
                    (act[0] + 0.5).floor().clamp(0.0, (self.classes - 1) as f64) as usize
                } else {
                    argmax_f64(&act)
                }
            }
            ModelBody::Svm(svm) => {
                let mut votes = vec![0usize; self.classes];
                for c in &svm.classifiers {
                    let z = c.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + c.bias;
                    votes[if z >= 0.0 { c.positive } else { c.negative }] += 1;
                }
                argmax_by(&votes)
            }
            ModelBody::Tree(tree) => {
                let mut i = 0;
                loop {
                    match tree.nodes[i] {
                        TreeNode::Leaf { class, .. } => return class,
                        TreeNode::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                            ..
                        } => i = if row[feature] >= threshold { right } else { left },
                    }
                }
            }
        }
    }

    /// Fraction of rows the floating-point model classifies correctly.
    pub fn float_accuracy(&self, data: &Dataset) -> f64 {
        let hits = data
            .features
            .iter()
            .zip(&data.labels)
            .filter(|(row, &label)| self.predict(row) == label)
            .count();
        hits as f64 / data.len() as f64
    }
}

/// First index of the maximum; ties resolve to the lowest index.
pub(crate) fn argmax_by<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn argmax_f64(values: &[f64]) -> usize {
    argmax_by(values)
}

fn validate_mlp(mlp: &MlpBody, inputs: usize, outputs: usize) -> Result<()> {
    if mlp.layers.is_empty() {
        return Err(Error::invalid_model("mlp.layers", "at least one layer required"));
    }
    let mut width = inputs;
    for (l, layer) in mlp.layers.iter().enumerate() {
        let path = format!("mlp.layers[{l}]");
        if layer.weights.is_empty() {
            return Err(Error::invalid_model(format!("{path}.weights"), "empty weight matrix"));
        }
        for (o, row) in layer.weights.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid_model(
                    format!("{path}.weights[{o}]"),
                    format!("expected {width} inputs, found {}", row.len()),
                ));
            }
            if let Some(i) = row.iter().position(|w| !w.is_finite()) {
                return Err(Error::invalid_model(
                    format!("{path}.weights[{o}][{i}]"),
                    "non-finite weight",
                ));
            }
        }
        if layer.bias.len() != layer.outputs() {
            return Err(Error::invalid_model(
                format!("{path}.bias"),
                format!("expected {} entries, found {}", layer.outputs(), layer.bias.len()),
            ));
        }
        if layer.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid_model(format!("{path}.bias"), "non-finite bias"));
        }
        width = layer.outputs();
    }
    if width != outputs {
        return Err(Error::invalid_model(
            format!("mlp.layers[{}].weights", mlp.layers.len() - 1),
            format!("final layer has {width} outputs, expected {outputs}"),
        ));
    }
    Ok(())
}

fn validate_svm(svm: &SvmBody, inputs: usize, classes: usize) -> Result<()> {
    let expected = classes * (classes - 1) / 2;
    if svm.classifiers.len() != expected {
        return Err(Error::invalid_model(
            "svm.classifiers",
            format!(
                "{classes} classes need {expected} pairwise classifiers, found {}",
                svm.classifiers.len()
            ),
        ));
    }
    let mut seen = BTreeMap::new();
    for (i, c) in svm.classifiers.iter().enumerate() {
        let path = format!("svm.classifiers[{i}]");
        if c.weights.len() != inputs {
            return Err(Error::invalid_model(
                format!("{path}.weights"),
                format!("expected {inputs} weights, found {}", c.weights.len()),
            ));
        }
        if c.weights.iter().any(|w| !w.is_finite()) || !c.bias.is_finite() {
            return Err(Error::invalid_model(path, "non-finite coefficient"));
        }
        if c.positive >= classes || c.negative >= classes || c.positive == c.negative {
            return Err(Error::invalid_model(
                format!("{path}.positive"),
                "class pair must be two distinct valid classes",
            ));
        }
        let pair = (c.positive.min(c.negative), c.positive.max(c.negative));
        if let Some(prev) = seen.insert(pair, i) {
            return Err(Error::invalid_model(
                path,
                format!("pair {pair:?} already covered by classifier {prev}"),
            ));
        }
    }
    Ok(())
}

/// Validates the node graph and renumbers it into preorder with the root
/// at index 0.
fn normalize_tree(tree: TreeBody, inputs: usize, classes: usize) -> Result<TreeBody> {
    if tree.nodes.is_empty() {
        return Err(Error::invalid_model("tree.nodes", "tree has no nodes"));
    }
    let mut by_id = HashMap::new();
    for (pos, node) in tree.nodes.iter().enumerate() {
        if by_id.insert(node.id(), pos).is_some() {
            return Err(Error::invalid_model(
                format!("tree.nodes[{pos}].id"),
                format!("duplicate node id {}", node.id()),
            ));
        }
    }
    let mut parents = vec![0usize; tree.nodes.len()];
    for (pos, node) in tree.nodes.iter().enumerate() {
        match *node {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if feature >= inputs {
                    return Err(Error::invalid_model(
                        format!("tree.nodes[{pos}].feature"),
                        format!("feature {feature} out of range for {inputs} inputs"),
                    ));
                }
                if !threshold.is_finite() {
                    return Err(Error::invalid_model(
                        format!("tree.nodes[{pos}].threshold"),
                        "non-finite threshold",
                    ));
                }
                for (field, child) in [("left", left), ("right", right)] {
                    match by_id.get(&child) {
                        Some(&c) => parents[c] += 1,
                        None => {
                            return Err(Error::invalid_model(
                                format!("tree.nodes[{pos}].{field}"),
                                format!("dangling child id {child}"),
                            ))
                        }
                    }
                }
            }
            TreeNode::Leaf { class, .. } => {
                if class >= classes {
                    return Err(Error::invalid_model(
                        format!("tree.nodes[{pos}].class"),
                        format!("class {class} out of range for {classes} classes"),
                    ));
                }
            }
        }
    }
    if let Some(pos) = parents.iter().position(|&p| p > 1) {
        return Err(Error::invalid_model(
            format!("tree.nodes[{pos}]"),
            "node has more than one parent",
        ));
    }
    let roots: Vec<usize> = (0..parents.len()).filter(|&p| parents[p] == 0).collect();
    if roots.len() != 1 {
        return Err(Error::invalid_model(
            "tree.nodes",
            format!("expected a single root, found {}", roots.len()),
        ));
    }

    let mut order = Vec::with_capacity(tree.nodes.len());
    let mut stack = vec![roots[0]];
    while let Some(pos) = stack.pop() {
        order.push(pos);
        if let TreeNode::Internal { left, right, .. } = tree.nodes[pos] {
            stack.push(by_id[&right]);
            stack.push(by_id[&left]);
        }
    }
    if order.len() != tree.nodes.len() {
        return Err(Error::invalid_model("tree.nodes", "node graph contains a cycle"));
    }
    let mut new_index = vec![0usize; tree.nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        new_index[old] = new;
    }
    let nodes = order
        .iter()
        .enumerate()
        .map(|(new, &old)| match tree.nodes[old] {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => TreeNode::Internal {
                id: new,
                feature,
                threshold,
                left: new_index[by_id[&left]],
                right: new_index[by_id[&right]],
            },
            TreeNode::Leaf { class, .. } => TreeNode::Leaf { id: new, class },
        })
        .collect();
    Ok(TreeBody { nodes })
}

/// Labelled feature rows. `ranges` holds each feature's `(min, max)` over the
/// file the data was loaded from and is inherited unchanged by splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub ranges: Vec<(f64, f64)>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument("row/label count mismatch".into()));
        }
        if features.len() < 2 {
            return Err(Error::InvalidDataset {
                line: 0,
                msg: "at least 2 rows required".into(),
            });
        }
        let width = features[0].len();
        if let Some((r, _)) = features.iter().enumerate().find(|(_, f)| f.len() != width) {
            return Err(Error::InvalidDataset {
                line: r + 2,
                msg: "ragged feature row".into(),
            });
        }
        if let Some((r, l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidDataset {
                line: r + 2,
                msg: format!("label {l} out of range (valid 0..{})", classes - 1),
            });
        }
        let ranges = (0..width)
            .map(|f| {
                features
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
                        (lo.min(row[f]), hi.max(row[f]))
                    })
            })
            .collect();
        Ok(Dataset {
            features,
            labels,
            ranges,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> usize {
        self.ranges.len()
    }

    fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&r| self.features[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            ranges: self.ranges.clone(),
            classes: self.classes,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, expected_inputs: usize, expected_classes: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, expected_inputs, expected_classes)
}

/// Parses CSV text with a header row.
pub fn parse_dataset(text: &str, expected_inputs: usize, expected_classes: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| Error::InvalidDataset {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != expected_inputs + 1 {
            return Err(Error::InvalidDataset {
                line,
                msg: format!("expected {} columns, found {}", expected_inputs + 1, record.len()),
            });
        }
        let row = record
            .iter()
            .take(expected_inputs)
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::InvalidDataset {
                        line,
                        msg: format!("column {c}: non-numeric cell `{cell}`"),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let cell = &record[expected_inputs];
        let label: usize = cell.parse().map_err(|_| Error::InvalidDataset {
            line,
            msg: format!("label `{cell}` is not a class index"),
        })?;
        if label >= expected_classes {
            return Err(Error::InvalidDataset {
                line,
                msg: format!("label {label} out of range (valid 0..{})", expected_classes - 1),
            });
        }
        features.push(row);
        labels.push(label);
    }
    if features.len() < 2 {
        return Err(Error::InvalidDataset {
            line: features.len() + 1,
            msg: "at least 2 rows required".into(),
        });
    }
    Dataset::new(features, labels, expected_classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// False when some class had fewer than 2 rows and the split fell back
    /// to unstratified sampling.
    pub stratified: bool,
}

/// Deterministic, stratified train/test split. Both partitions keep the
/// parent's row order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n = data.len();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} leaves an empty partition of {n} rows"
        )));
    }

    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); data.classes];
    for (r, &l) in data.labels.iter().enumerate() {
        strata[l].push(r);
    }
    let stratified = strata.iter().all(|s| s.is_empty() || s.len() >= 2);
    if !stratified {
        log::warn!("class with fewer than 2 rows; falling back to an unstratified split");
        strata = vec![(0..n).collect()];
    }

    // Largest-remainder allocation of the test quota over strata.
    let exact: Vec<f64> = strata
        .iter()
        .map(|s| s.len() as f64 * n_test as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut missing = n_test - quota.iter().sum::<usize>();
    for &s in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quota[s] < strata[s].len() {
            quota[s] += 1;
            missing -= 1;
        }
    }

    let mut is_test = vec![false; n];
    for (s, rows) in strata.iter().enumerate() {
        let mut rows = rows.clone();
        let mut rng = rng::stream(seed, Purpose::Split, s as u32, 0);
        rows.shuffle(&mut rng);
        for &r in &rows[..quota[s]] {
            is_test[r] = true;
        }
    }
    let (test_rows, train_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| is_test[r]);
    Ok(Split {
        train: data.subset(&train_rows),
        test: data.subset(&test_rows),
        stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_leaf() -> &'static str {
        r#"{"kind":"decision-tree","inputs":1,"classes":2,"tree":{"nodes":[{"id":0,"class":0}]}}"#
    }

    #[test]
    fn degenerate_tree_is_valid() {
        let m = TrainedModel::from_json(one_leaf()).unwrap();
        assert_eq!(m.kind, ModelKind::DecisionTree);
        assert_eq!(m.predict(&[3.0]), 0);
    }

    #[test]
    fn mlp_dimension_error_names_layer() {
        // 4 -> 3 -> 2, but the second matrix is 2 rows of 4 inputs.
        let text = r#"{"kind":"mlp-classifier","inputs":4,"classes":2,"mlp":{"layers":[
            {"weights":[[1,0,0,0],[0,1,0,0],[0,0,1,0]],"bias":[0,0,0],"activation":"relu"},
            {"weights":[[1,0,0,0],[0,1,0,0]],"bias":[0,0],"activation":"none"}]}}"#;
        match TrainedModel::from_json(text) {
            Err(Error::InvalidModel { path, .. }) => assert!(path.starts_with("mlp.layers[1]"), "{path}"),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    fn svm_json(pairs: &[(usize, usize)]) -> String {
        let cls: Vec<String> = pairs
            .iter()
            .map(|(p, n)| format!(r#"{{"weights":[1.0],"bias":0.0,"positive":{p},"negative":{n}}}"#))
            .collect();
        format!(
            r#"{{"kind":"svm-classifier","inputs":1,"classes":3,"svm":{{"classifiers":[{}]}}}}"#,
            cls.join(",")
        )
    }

    #[test]
    fn svm_pair_count() {
        assert!(TrainedModel::from_json(&svm_json(&[(0, 1), (0, 2), (1, 2)])).is_ok());
        match TrainedModel::from_json(&svm_json(&[(0, 1), (0, 2)])) {
            Err(Error::InvalidModel { path, .. }) => assert_eq!(path, "svm.classifiers"),
            other => panic!("expected pair-count error, got {other:?}"),
        }
        assert!(TrainedModel::from_json(&svm_json(&[(0, 1), (1, 0), (1, 2)])).is_err());
    }

    #[test]
    fn tree_dangling_child_and_cycle() {
        let dangling = r#"{"kind":"decision-tree","inputs":1,"classes":2,"tree":{"nodes":[
            {"id":0,"feature":0,"threshold":0.5,"left":1,"right":7},{"id":1,"class":0}]}}"#;
        match TrainedModel::from_json(dangling) {
            Err(Error::InvalidModel { path, msg }) => {
                assert_eq!(path, "tree.nodes[0].right");
                assert!(msg.contains("dangling"));
            }
            other => panic!("{other:?}"),
        }
        let cyclic = r#"{"kind":"decision-tree","inputs":1,"classes":2,"tree":{"nodes":[
            {"id":0,"feature":0,"threshold":0.5,"left":1,"right":2},{"id":1,"class":0},
            {"id":2,"feature":0,"threshold":0.5,"left":3,"right":4},{"id":3,"class":0},
            {"id":4,"feature":0,"threshold":0.1,"left":2,"right":3}]}}"#;
        assert!(TrainedModel::from_json(cyclic).is_err());
    }

    #[test]
    fn tree_renumbered_to_preorder() {
        let text = r#"{"kind":"decision-tree","inputs":1,"classes":2,"tree":{"nodes":[
            {"id":5,"class":1},{"id":9,"feature":0,"threshold":0.5,"left":3,"right":5},{"id":3,"class":0}]}}"#;
        let m = TrainedModel::from_json(text).unwrap();
        let ModelBody::Tree(t) = &m.body else { panic!() };
        assert!(matches!(t.nodes[0], TreeNode::Internal { left: 1, right: 2, .. }));
        assert_eq!(m.predict(&[0.2]), 0);
        assert_eq!(m.predict(&[0.5]), 1);
        let again = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn kind_body_mismatch() {
        let text = r#"{"kind":"svm-classifier","inputs":1,"classes":2,"tree":{"nodes":[{"id":0,"class":0}]}}"#;
        assert!(matches!(
            TrainedModel::from_json(text),
            Err(Error::InvalidModel { ref path, .. }) if path == "kind"
        ));
        assert!(matches!(TrainedModel::from_json("{"), Err(Error::ModelParse(_))));
    }

    #[test]
    fn dataset_examples() {
        let d = parse_dataset("a,label\n0,0\n1,1\n", 1, 2).unwrap();
        assert_eq!(d.ranges, vec![(0.0, 1.0)]);
        assert_eq!(d.labels, vec![0, 1]);

        let d = parse_dataset("a,label\n0.5,0\n0.5,1\n0.5,1\n", 1, 2).unwrap();
        assert_eq!(d.ranges, vec![(0.5, 0.5)]);

        let err = parse_dataset("a,label\n0,0\n1,3\n", 1, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset { line: 3, .. }), "{err}");
        assert!(parse_dataset("a,label\n0,0\nx,1\n", 1, 2).is_err());
        assert!(parse_dataset("a,b,label\n0,0\n1,1\n", 1, 2).is_err());
        assert!(parse_dataset("a,label\n0,0\n", 1, 2).is_err());
    }

    fn toy(n: usize, classes: usize) -> Dataset {
        let features = (0..n).map(|i| vec![i as f64]).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        Dataset::new(features, labels, classes).unwrap()
    }

    #[test]
    fn split_counts_and_determinism() {
        let d = toy(10, 2);
        let s = split(&d, 0.3, 7).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (7, 3));
        let mut all: Vec<f64> = s.train.features.iter().chain(&s.test.features).map(|r| r[0]).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(split(&d, 0.3, 7).unwrap(), s);
        assert_eq!(s.train.ranges, d.ranges);
        assert_eq!(s.test.ranges, d.ranges);
    }

    #[test]
    fn split_is_stratified() {
        let d = toy(100, 2);
        let s = split(&d, 0.2, 3).unwrap();
        assert!(s.stratified);
        let zeros = s.test.labels.iter().filter(|&&l| l == 0).count();
        assert_eq!((zeros, s.test.len() - zeros), (10, 10));
    }

    #[test]
    fn split_falls_back_when_class_is_tiny() {
        let mut labels = vec![0; 9];
        labels.push(1);
        let d = Dataset::new((0..10).map(|i| vec![i as f64]).collect(), labels, 2).unwrap();
        let s = split(&d, 0.3, 1).unwrap();
        assert!(!s.stratified);
        assert_eq!(s.train.len() + s.test.len(), 10);
        assert!(split(&d, 0.01, 1).is_err());
        assert!(split(&d, 1.0, 1).is_err());
    }
}
