#![allow(dead_code)]

use std::path::PathBuf;

use axsynth::fxp::{quantize_model, FxpFormat, QuantizedModel};
use axsynth::model::{load_dataset, load_model, split, Dataset, Split, TrainedModel};

pub const MLP_SVM: [&str; 4] = ["mlp_c_cancer", "mlp_c_wine", "mlp_r_iris", "svm_c_wine"];
pub const TREES: [&str; 3] = ["dt_iris", "dt_wine", "dt_cancer"];

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn dataset_for(model: &str) -> &'static str {
    if model.ends_with("cancer") {
        "cancer.csv"
    } else if model.ends_with("wine") {
        "wine.csv"
    } else {
        "iris.csv"
    }
}

pub struct Fixture {
    pub model: TrainedModel,
    pub data: Dataset,
    pub split: Split,
}

pub fn load(name: &str) -> Fixture {
    let model = load_model(fixture(&format!("{name}.json"))).unwrap();
    let data = load_dataset(fixture(dataset_for(name)), model.inputs, model.classes).unwrap();
    let split = split(&data, 0.3, 42).unwrap();
    Fixture { model, data, split }
}

pub fn formats() -> (FxpFormat, FxpFormat) {
    (
        FxpFormat::new(4, 4, false).unwrap(),
        FxpFormat::new(8, 7, true).unwrap(),
    )
}

pub fn quantized(f: &Fixture) -> QuantizedModel {
    let (i, w) = formats();
    quantize_model(&f.model, i, w, &f.split.train).unwrap()
}
