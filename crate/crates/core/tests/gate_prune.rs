use axsynth::netlist::{area, simulate_rows, Builder, Netlist};
use axsynth::prune::{prune, prune_zero_activity, PruneParams, PruneStatus};
use axsynth::synth::{input_row, synth_model};
use axsynth::Error;
use proptest::prelude::*;

mod common;
use common::{load, quantized, MLP_SVM};

/// Accuracy of the `label` port, by plain row-by-row simulation.
fn label_accuracy(n: &Netlist, rows: &[Vec<u64>], labels: &[usize]) -> f64 {
    let k = n.output_index("label").unwrap();
    let outs = simulate_rows(n, rows).unwrap();
    let hits = outs.iter().zip(labels).filter(|(o, l)| o[k] == **l as u64).count();
    hits as f64 / rows.len() as f64
}

fn train_stimuli(name: &str) -> (Netlist, Vec<Vec<u64>>, Vec<usize>) {
    let f = load(name);
    let q = quantized(&f);
    let rows = f
        .split
        .train
        .features
        .iter()
        .map(|r| input_row(&q.quantize_inputs(r)))
        .collect();
    (synth_model(&q), rows, f.split.train.labels.clone())
}

#[test]
fn fixtures_stay_within_budget() {
    for name in MLP_SVM {
        let (n, rows, labels) = train_stimuli(name);
        let params = PruneParams::default();
        let out = prune(&n, &rows, &labels, params).unwrap();
        out.netlist.validate().unwrap();

        let before = label_accuracy(&n, &rows, &labels);
        let after = label_accuracy(&out.netlist, &rows, &labels);
        assert_eq!(out.accuracy_before, before, "{name}");
        assert_eq!(out.accuracy_after, after, "{name}");
        assert!(
            (before - after) * 100.0 <= params.budget_pp + 1e-9,
            "{name}: {before} -> {after}"
        );
        assert!(
            area(&out.netlist).gate_equivalents <= area(&n).gate_equivalents,
            "{name}"
        );
        assert!(out.accepted() > 0, "{name}");
        for e in &out.log {
            assert!(e.decision.toggle_rate <= params.max_toggle_rate, "{name}");
            assert_eq!(e.decision.replacement, e.decision.majority);
        }
        // A gate is decided at most once per round.
        let mut seen = std::collections::HashSet::new();
        assert!(
            out.log.iter().all(|e| seen.insert((e.round, e.decision.gate))),
            "{name}"
        );
    }
}

#[test]
fn zero_budget_never_loses_accuracy() {
    let (n, rows, labels) = train_stimuli("mlp_c_cancer");
    let params = PruneParams {
        budget_pp: 0.0,
        ..Default::default()
    };
    let out = prune(&n, &rows, &labels, params).unwrap();
    assert!(label_accuracy(&out.netlist, &rows, &labels) >= label_accuracy(&n, &rows, &labels));
}

#[test]
fn reference_accuracy_moves_the_floor() {
    let (n, rows, labels) = train_stimuli("svm_c_wine");
    let own = label_accuracy(&n, &rows, &labels);
    // A reference one budget above the start leaves no room at all.
    let params = PruneParams {
        reference_accuracy: Some(own + 0.01),
        ..Default::default()
    };
    let out = prune(&n, &rows, &labels, params).unwrap();
    assert!(label_accuracy(&out.netlist, &rows, &labels) >= own - 1e-12);
}

#[test]
fn zero_activity_pruning_keeps_every_output() {
    for name in MLP_SVM {
        let (n, rows, _) = train_stimuli(name);
        let p = prune_zero_activity(&n, &rows).unwrap();
        assert_eq!(
            simulate_rows(&p, &rows).unwrap(),
            simulate_rows(&n, &rows).unwrap(),
            "{name}"
        );
        assert!(area(&p).gate_equivalents < area(&n).gate_equivalents, "{name}");
    }
}

#[test]
fn argument_errors() {
    let (n, rows, labels) = train_stimuli("mlp_r_iris");
    let bad = |p: PruneParams| prune(&n, &rows, &labels, p).unwrap_err();
    assert!(matches!(
        bad(PruneParams {
            batch: 0,
            ..Default::default()
        }),
        Error::InvalidArgument(_)
    ));
    assert!(matches!(
        bad(PruneParams {
            budget_pp: -1.0,
            ..Default::default()
        }),
        Error::InvalidArgument(_)
    ));
    assert!(prune(&n, &rows, &labels[1..], PruneParams::default()).is_err());

    let mut b = Builder::new("nolabel");
    let x = b.input("x", 2);
    let y = b.and(x[0], x[1]);
    b.output("y", vec![y]);
    let err = prune(&b.finish(), &[vec![0], vec![3]], &[0, 1], PruneParams::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidNetlist(_)), "{err}");
}

/// Small random circuit with a two-bit `label` output over a 5-bit input.
fn random_classifier(ops: &[(u8, usize, usize)]) -> Netlist {
    let mut b = Builder::new("rand");
    let mut nets = b.input("x", 5);
    for &(k, i, j) in ops {
        let (a, c) = (nets[i % nets.len()], nets[j % nets.len()]);
        let n = match k % 4 {
            0 => b.and(a, c),
            1 => b.or(a, c),
            2 => b.xor(a, c),
            _ => b.nand(a, c),
        };
        nets.push(n);
    }
    let l = nets.len();
    b.output("label", vec![nets[l - 1], nets[l - 2]]);
    b.finish()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn random_circuits_respect_budget(
        ops in prop::collection::vec((any::<u8>(), any::<usize>(), any::<usize>()), 2..40),
        xs in prop::collection::vec(0u64..32, 20..120),
        noise in prop::collection::vec(0usize..4, 120),
        budget in 0.0f64..20.0,
        batch in 1usize..9,
        cap in 0.0f64..1.0,
    ) {
        let n = random_classifier(&ops);
        let rows: Vec<Vec<u64>> = xs.iter().map(|&x| vec![x]).collect();
        // Labels are the circuit's own answers with a few replaced.
        let k = n.output_index("label").unwrap();
        let labels: Vec<usize> = simulate_rows(&n, &rows)
            .unwrap()
            .iter()
            .zip(&noise)
            .map(|(o, &z)| if z == 0 { (o[k] as usize + 1) % 4 } else { o[k] as usize })
            .collect();
        let params = PruneParams { budget_pp: budget, batch, reference_accuracy: None, max_toggle_rate: cap };
        let out = prune(&n, &rows, &labels, params).unwrap();
        let before = label_accuracy(&n, &rows, &labels);
        let after = label_accuracy(&out.netlist, &rows, &labels);
        prop_assert!((before - after) * 100.0 <= budget + 1e-9);
        prop_assert!(area(&out.netlist).gate_equivalents <= area(&n).gate_equivalents + 1e-9);
        for e in &out.log {
            prop_assert!(e.decision.toggle_rate <= cap);
        }
        // The final round accepts nothing.
        prop_assert!(out.log.iter().all(|e| e.round < out.rounds || e.status == PruneStatus::RolledBack));
    }
}
