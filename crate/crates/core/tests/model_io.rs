use axsynth::model::{load_dataset, load_model, parse_dataset, split, Dataset, ModelKind, TrainedModel};
use axsynth::Error;
use proptest::prelude::*;
use serde_json::Value;

mod common;
use common::{dataset_for, fixture, MLP_SVM, TREES};

fn all() -> impl Iterator<Item = &'static str> {
    MLP_SVM.iter().chain(TREES.iter()).copied()
}

#[test]
fn fixtures_load_and_round_trip() {
    for name in all() {
        let m = load_model(fixture(&format!("{name}.json"))).unwrap();
        let expected = match &name[..4] {
            "mlp_" if name.starts_with("mlp_r") => ModelKind::MlpRegressor,
            "mlp_" => ModelKind::MlpClassifier,
            "svm_" => ModelKind::SvmClassifier,
            _ => ModelKind::DecisionTree,
        };
        assert_eq!(m.kind, expected, "{name}");
        let again = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m, "{name}");
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

/// Float inference straight from the JSON document.
fn predict_json(doc: &Value, row: &[f64]) -> usize {
    let classes = doc["classes"].as_u64().unwrap() as usize;
    let argmax = |v: &[f64]| {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if *x > v[best] {
                best = i;
            }
        }
        best
    };
    match doc["kind"].as_str().unwrap() {
        "mlp-classifier" | "mlp-regressor" => {
            let mut act = row.to_vec();
            for layer in doc["mlp"]["layers"].as_array().unwrap() {
                let relu = layer["activation"] == "relu";
                act = layer["weights"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .zip(layer["bias"].as_array().unwrap())
                    .map(|(w, b)| {
                        let mut z = num(b);
                        for (w, x) in w.as_array().unwrap().iter().zip(&act) {
                            z += num(w) * x;
                        }
                        if relu {
                            z.max(0.0)
                        } else {
                            z
                        }
                    })
                    .collect();
            }
            if doc["kind"] == "mlp-regressor" {
                (act[0] + 0.5).floor().clamp(0.0, classes as f64 - 1.0) as usize
            } else {
                argmax(&act)
            }
        }
        "svm-classifier" => {
            let mut votes = vec![0.0; classes];
            for c in doc["svm"]["classifiers"].as_array().unwrap() {
                let mut z = num(&c["bias"]);
                for (w, x) in c["weights"].as_array().unwrap().iter().zip(row) {
                    z += num(w) * x;
                }
                let winner = if z >= 0.0 { &c["positive"] } else { &c["negative"] };
                votes[winner.as_u64().unwrap() as usize] += 1.0;
            }
            argmax(&votes)
        }
        "decision-tree" => {
            let nodes = doc["tree"]["nodes"].as_array().unwrap();
            let by_id = |id: u64| nodes.iter().find(|n| n["id"].as_u64() == Some(id)).unwrap();
            let mut n = by_id(0);
            loop {
                if let Some(c) = n["class"].as_u64() {
                    return c as usize;
                }
                let f = n["feature"].as_u64().unwrap() as usize;
                let next = if row[f] >= num(&n["threshold"]) {
                    &n["right"]
                } else {
                    &n["left"]
                };
                n = by_id(next.as_u64().unwrap());
            }
        }
        other => panic!("unexpected kind {other}"),
    }
}

#[test]
fn float_inference_matches_independent_evaluator() {
    for name in all() {
        let path = fixture(&format!("{name}.json"));
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let m = load_model(&path).unwrap();
        let data = load_dataset(fixture(dataset_for(name)), m.inputs, m.classes).unwrap();
        for row in &data.features {
            assert_eq!(m.predict(row), predict_json(&doc, row), "{name} on {row:?}");
        }
    }
}

#[test]
fn model_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = load_model(dir.path().join("nope.json")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }), "{missing}");

    assert!(matches!(
        TrainedModel::from_json("{not json"),
        Err(Error::ModelParse(_))
    ));
    let extra = r#"{"kind": "svm", "inputs": 1, "classes": 2, "colour": 1,
        "svm": {"classifiers": [{"weights": [1.0], "bias": 0.0, "positive": 0, "negative": 1}]}}"#;
    assert!(TrainedModel::from_json(extra).is_err());

    let bad_width = r#"{"kind": "mlp-classifier", "inputs": 2, "classes": 2, "mlp": {"layers": [
        {"weights": [[1.0, 2.0], [3.0]], "bias": [0.0, 0.0], "activation": "none"}]}}"#;
    match TrainedModel::from_json(bad_width).unwrap_err() {
        Error::InvalidModel { path, .. } => assert!(path.contains("layers[0]"), "{path}"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn dataset_errors_carry_line_numbers() {
    let short = "a,b,label\n1,2,0\n3,1\n";
    match parse_dataset(short, 2, 2).unwrap_err() {
        Error::InvalidDataset { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
    let label = "a,label\n1,0\n2,5\n";
    match parse_dataset(label, 1, 2).unwrap_err() {
        Error::InvalidDataset { line, msg } => {
            assert_eq!(line, 3);
            assert!(msg.contains("out of range"), "{msg}");
        }
        e => panic!("unexpected {e}"),
    }
    assert!(parse_dataset("a,label\n1,x\n2,0\n", 1, 2).is_err());
    assert!(parse_dataset("a,label\nnan,0\n2,0\n", 1, 2).is_err());
    assert!(parse_dataset("a,label\n1,0\n", 1, 2).is_err());
}

fn toy() -> impl Strategy<Value = Dataset> {
    (2usize..4, 4usize..60).prop_flat_map(|(classes, n)| {
        prop::collection::vec((0..classes, -5.0f64..5.0), n).prop_map(move |rows| {
            let features = rows.iter().enumerate().map(|(i, r)| vec![r.1, i as f64]).collect();
            let labels = rows.iter().map(|r| r.0).collect();
            Dataset::new(features, labels, classes).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn split_partitions_rows_in_order(data in toy(), frac in 0.1f64..0.9, seed in any::<u64>()) {
        let n_test = (data.len() as f64 * frac).round() as usize;
        prop_assume!(n_test > 0 && n_test < data.len());
        let s = split(&data, frac, seed).unwrap();
        prop_assert_eq!(s.test.len(), n_test);
        prop_assert_eq!(s.train.len() + s.test.len(), data.len());
        // Column 1 holds the row index: both halves ascend and together
        // cover every row exactly once.
        let ids = |d: &Dataset| d.features.iter().map(|r| r[1] as usize).collect::<Vec<_>>();
        let (a, b) = (ids(&s.train), ids(&s.test));
        prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort();
        prop_assert_eq!(all, (0..data.len()).collect::<Vec<_>>());
        prop_assert_eq!(&split(&data, frac, seed).unwrap(), &s);
    }
}
