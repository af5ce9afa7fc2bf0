use std::fs;

use axsynth::flow::{
    cmd_approx, cmd_eval, cmd_evolve, cmd_report, cmd_synth, gain_pct, run_approx, run_evolve, verify, FlowConfig,
    FlowReport, Phase, Prepared, SUMMARY_HEADER,
};
use axsynth::fxp::accuracy;
use axsynth::netlist::{simulate_rows, NetlistFormat};
use axsynth::synth::input_row;
use axsynth::Error;

mod common;
use common::fixture;

fn cfg() -> FlowConfig {
    let mut c = FlowConfig::with_seed(42);
    c.nsga.pop = 20;
    c.nsga.gens = 10;
    c.equivalence_rows = 200;
    c
}

fn prepared(name: &str, data: &str) -> Prepared {
    Prepared::load(&fixture(&format!("{name}.json")), &fixture(data), &cfg()).unwrap()
}

/// Test accuracy of a netlist by plain row simulation.
fn sim_accuracy(p: &Prepared, n: &axsynth::netlist::Netlist) -> f64 {
    let rows: Vec<Vec<u64>> = p
        .split
        .test
        .features
        .iter()
        .map(|r| input_row(&p.quantized.quantize_inputs(r)))
        .collect();
    let k = n.output_index("label").unwrap();
    let outs = simulate_rows(n, &rows).unwrap();
    outs.iter()
        .zip(&p.split.test.labels)
        .filter(|(o, l)| o[k] == **l as u64)
        .count() as f64
        / rows.len() as f64
}

#[test]
fn synth_reports_match_independent_simulation() {
    let p = prepared("mlp_c_wine", "wine.csv");
    assert_eq!(p.id, "mlp_c_wine");
    let (out, art) = cmd_synth(&p, &cfg()).unwrap();
    assert!(out.equivalence.passed());
    assert_eq!(out.report.phase, Phase::ExactBespoke);
    assert_eq!(out.report.accuracy_test, sim_accuracy(&p, &out.netlist));
    assert_eq!(out.report.accuracy_test, accuracy(&p.quantized, &p.split.test));
    assert_eq!((out.report.area_gain_pct, out.report.power_gain_pct), (0.0, 0.0));
    assert!(out.report.battery.is_none());
    assert!(out.report.battery_note.as_deref().unwrap().contains("calibration"));
    let names: Vec<&str> = art.files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["mlp_c_wine.exact.v", "mlp_c_wine.synth.json"]);
    assert!(art.files[0].1.contains("module"));
}

#[test]
fn eval_of_the_exact_netlist_has_no_gain() {
    let p = prepared("svm_c_wine", "wine.csv");
    let mut c = cfg();
    c.calibration_mw_per_ge = Some(0.001);
    let (exact, _) = cmd_synth(&p, &c).unwrap();
    let (r, art) = cmd_eval(&p, Some(&exact.netlist), &c).unwrap();
    assert_eq!(r.phase, Phase::Approximated);
    assert_eq!((r.area_gain_pct, r.power_gain_pct), (0.0, 0.0));
    assert_eq!(r.area_proxy, exact.report.area_proxy);
    let b = r.battery.as_ref().unwrap();
    assert!((b.estimated_mw - r.power_proxy * 0.001).abs() < 1e-12);
    assert!(r.battery_note.is_none());
    assert_eq!(art.files[0].0, "svm_c_wine.eval.json");

    let (alone, _) = cmd_eval(&p, None, &c).unwrap();
    assert_eq!(alone, exact.report);
}

#[test]
fn approx_outcome_is_consistent() {
    let p = prepared("mlp_c_cancer", "cancer.csv");
    let c = cfg();
    let out = run_approx(&p, &c).unwrap();
    assert!(out.equivalence.passed() && out.exact.equivalence.passed());
    assert!(out.report.area_proxy < out.exact.report.area_proxy);
    assert_eq!(
        out.report.area_gain_pct,
        gain_pct(out.exact.report.area_proxy, out.report.area_proxy)
    );
    assert_eq!(out.report.accuracy_test, sim_accuracy(&p, &out.netlist));
    assert!((out.train_accuracy_exact - out.train_accuracy_final) * 100.0 <= c.accuracy_budget_pp + 1e-9);
    assert_eq!(out.config.coefficients.len(), out.plan.changed_weights());
    assert!(out
        .config
        .coefficients
        .iter()
        .all(|ch| ch.original != ch.chosen && (ch.original - ch.chosen).abs() <= c.delta));
    assert_eq!(
        out.config.pruned_gates.len(),
        out.prune_log
            .iter()
            .filter(|e| e.status == axsynth::prune::PruneStatus::Accepted)
            .count()
    );
    // The resynthesized circuit implements the approximated model.
    assert!(verify(&p, &out.approx_model, &out.resynth, &c).unwrap().passed());
}

#[test]
fn evolve_outcome_is_consistent() {
    let p = prepared("dt_wine", "wine.csv");
    let out = run_evolve(&p, &cfg()).unwrap();
    assert!(out.equivalence.passed());
    assert!(out.result.selected.accuracy_loss_pp <= cfg().accuracy_budget_pp + 1e-9);
    assert_eq!(out.config.comparators.len(), out.result.selected.genome.len());
    assert!(out.comparator_area_gain_pct() >= 0.0);
    assert_eq!(out.report.accuracy_test, sim_accuracy(&p, &out.netlist));
    assert!(out.report.area_proxy <= out.exact.report.area_proxy);
}

#[test]
fn commands_reject_the_wrong_kind() {
    let tree = prepared("dt_iris", "iris.csv");
    let mlp = prepared("mlp_r_iris", "iris.csv");
    for err in [
        cmd_approx(&tree, &cfg()).unwrap_err(),
        cmd_evolve(&mlp, &cfg()).unwrap_err(),
    ] {
        assert!(matches!(err, Error::KindMismatch { .. }), "{err}");
    }
}

#[test]
fn report_writes_every_artifact() {
    let models = [prepared("mlp_r_iris", "iris.csv"), prepared("dt_iris", "iris.csv")];
    let mut c = cfg();
    c.netlist_format = NetlistFormat::Json;
    let (report, art) = cmd_report(&models, &c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = art.write(dir.path()).unwrap();
    let mut names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "dt_iris.approx.json",
            "dt_iris.exact.json",
            "dt_iris.pareto.csv",
            "mlp_r_iris.approx.json",
            "mlp_r_iris.exact.json",
            "report.json",
            "summary.csv",
        ]
    );
    let back: FlowReport = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    for m in &report.models {
        assert!(m.exact_equivalence.passed() && m.approx_equivalence.passed());
    }
    let netlist = fs::read_to_string(dir.path().join("dt_iris.approx.json")).unwrap();
    axsynth::netlist::Netlist::from_json(&netlist)
        .unwrap()
        .validate()
        .unwrap();

    let mut rd = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), &SUMMARY_HEADER[..]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][0], "mlp_r_iris");
    let gain: f64 = rows[1][7].parse().unwrap();
    assert!((gain - report.models[1].approximated.area_gain_pct).abs() <= 0.05);
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(
        &path,
        r#"{"seed": 3, "delta": 1, "nsga": {"pop": 8, "gens": 2, "crossover_p": 0.5}}"#,
    )
    .unwrap();
    let c = FlowConfig::load(&path).unwrap();
    assert_eq!((c.seed, c.delta, c.nsga.pop), (3, 1, 8));
    assert_eq!(c.accuracy_budget_pp, 1.0);

    for bad in [
        r#"{"delta": 1}"#,
        r#"{"seed": 1, "colour": 2}"#,
        r#"{"seed": 1, "delta": -1}"#,
        r#"{"seed": 1, "test_fraction": 1.0}"#,
        r#"{"seed": 1, "prune_batch": 0}"#,
        r#"{"seed": 1, "calibration_mw_per_ge": 0.0}"#,
    ] {
        assert!(matches!(FlowConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
    }
    assert!(matches!(
        FlowConfig::load(dir.path().join("missing.json")),
        Err(Error::Io { .. })
    ));
}
