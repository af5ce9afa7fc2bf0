//! End-to-end flows behind the command-line tool: configuration, the five
//! commands, evaluation reports and the battery check.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::approx::{approximate_sums, ReplacementPlan};
use crate::error::{Error, Result};
use crate::evolve::{dt_area_proxy, evolve, pareto_csv, EvolveResult, Fitness, NsgaParams, TreeSpace};
use crate::fxp::{quantize_model, FxpFormat, QuantBody, QuantNode, QuantizedModel};
use crate::model::{load_dataset, load_model, split, Dataset, ModelKind, Split, TrainedModel};
use crate::netlist::{area, power_proxy, profile_activity, Netlist, NetlistFormat, PackedStimulus};
use crate::prune::{prune, PruneLogEntry, PruneParams, PruneStatus};
use crate::rng::{self, Purpose};
use crate::synth::{check_equivalence, input_row, random_code_rows, synth_model, Equivalence};

fn default_input_format() -> FxpFormat {
    FxpFormat {
        total_bits: 4,
        fraction_bits: 4,
        signed: false,
    }
}

fn default_weight_format() -> FxpFormat {
    FxpFormat {
        total_bits: 8,
        fraction_bits: 7,
        signed: true,
    }
}

fn default_delta() -> i64 {
    2
}
fn default_budget() -> f64 {
    1.0
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_validation_fraction() -> f64 {
    0.3
}
fn default_batch() -> usize {
    32
}
fn default_max_toggle_rate() -> f64 {
    0.02
}
fn default_equivalence_rows() -> usize {
    1000
}
fn default_static_power() -> f64 {
    crate::netlist::STATIC_POWER_COEFF
}
fn default_netlist_format() -> NetlistFormat {
    NetlistFormat::Verilog
}

/// Every knob of a flow run. Only `seed` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub seed: u64,
    #[serde(default = "default_input_format")]
    pub input_format: FxpFormat,
    #[serde(default = "default_weight_format")]
    pub weight_format: FxpFormat,
    /// Replacement window in LSBs, for weights and tree thresholds.
    #[serde(default = "default_delta")]
    pub delta: i64,
    #[serde(default = "default_budget")]
    pub accuracy_budget_pp: f64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Share of the training split held out to score tree genomes.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default = "default_batch")]
    pub prune_batch: usize,
    #[serde(default = "default_max_toggle_rate")]
    pub prune_max_toggle_rate: f64,
    #[serde(default)]
    pub nsga: NsgaParams,
    /// Random input rows added to the data rows in equivalence checks.
    #[serde(default = "default_equivalence_rows")]
    pub equivalence_rows: usize,
    #[serde(default = "default_static_power")]
    pub static_power_coeff: f64,
    #[serde(default)]
    pub calibration_mw_per_ge: Option<f64>,
    #[serde(default = "default_netlist_format")]
    pub netlist_format: NetlistFormat,
    /// Not serialized, so reports do not depend on where they are written.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl FlowConfig {
    pub fn with_seed(seed: u64) -> Self {
        FlowConfig {
            seed,
            input_format: default_input_format(),
            weight_format: default_weight_format(),
            delta: default_delta(),
            accuracy_budget_pp: default_budget(),
            test_fraction: default_test_fraction(),
            validation_fraction: default_validation_fraction(),
            prune_batch: default_batch(),
            prune_max_toggle_rate: default_max_toggle_rate(),
            nsga: NsgaParams::default(),
            equivalence_rows: default_equivalence_rows(),
            static_power_coeff: default_static_power(),
            calibration_mw_per_ge: None,
            netlist_format: default_netlist_format(),
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: FlowConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let i = self.input_format;
        FxpFormat::new(i.total_bits, i.fraction_bits, i.signed).map_err(|e| Error::Config(e.to_string()))?;
        let w = self.weight_format;
        FxpFormat::new(w.total_bits, w.fraction_bits, w.signed).map_err(|e| Error::Config(e.to_string()))?;
        if i.signed || i.total_bits > 16 {
            return bad("input format must be unsigned and at most 16 bits".into());
        }
        if !w.signed || w.total_bits > 24 {
            return bad("weight format must be signed and at most 24 bits".into());
        }
        if self.delta < 0 {
            return bad(format!("delta {} is negative", self.delta));
        }
        if !(self.accuracy_budget_pp >= 0.0) {
            return bad("accuracy_budget_pp must be >= 0".into());
        }
        for (name, f) in [
            ("test_fraction", self.test_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name} must lie in (0, 1)"));
            }
        }
        if self.prune_batch == 0 {
            return bad("prune_batch must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.prune_max_toggle_rate) {
            return bad("prune_max_toggle_rate must lie in [0, 1]".into());
        }
        if self.nsga.pop < 4 || !self.nsga.pop.is_multiple_of(2) {
            return bad("nsga.pop must be even and at least 4".into());
        }
        if !(0.0..=1.0).contains(&self.nsga.crossover_p)
            || self.nsga.mutation_p.is_some_and(|p| !(0.0..=1.0).contains(&p))
        {
            return bad("nsga probabilities must lie in [0, 1]".into());
        }
        if !(self.static_power_coeff >= 0.0) {
            return bad("static_power_coeff must be >= 0".into());
        }
        if let Some(c) = self.calibration_mw_per_ge {
            if !(c > 0.0) {
                return bad("calibration_mw_per_ge must be > 0".into());
            }
        }
        Ok(())
    }
}

/// Battery supplies a design is checked against, strictest last.
pub const BATTERY_THRESHOLDS_MW: [(&str, f64); 3] = [
    ("molex-30mW", 30.0),
    ("blue-spark-3mW", 3.0),
    ("energy-harvester-0.1mW", 0.1),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub calibration_mw_per_ge: f64,
    pub estimated_mw: f64,
    /// Supplies whose budget the estimate stays strictly below.
    pub feasible_under: Vec<String>,
}

pub fn battery_check(power_proxy: f64, calibration_mw_per_ge: f64) -> Result<Battery> {
    if !(calibration_mw_per_ge > 0.0) {
        return Err(Error::InvalidArgument(
            "calibration must be > 0 mW per gate equivalent".into(),
        ));
    }
    let estimated_mw = power_proxy * calibration_mw_per_ge;
    Ok(Battery {
        calibration_mw_per_ge,
        estimated_mw,
        feasible_under: BATTERY_THRESHOLDS_MW
            .iter()
            .filter(|(_, limit)| estimated_mw < *limit)
            .map(|(name, _)| name.to_string())
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    ExactBespoke,
    Approximated,
}

/// Test-set metrics of one circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub kind: ModelKind,
    pub phase: Phase,
    pub accuracy_test: f64,
    pub gates: usize,
    pub area_proxy: f64,
    pub power_proxy: f64,
    pub area_gain_pct: f64,
    pub power_gain_pct: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<Battery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_note: Option<String>,
}

/// `(exact - approx) / exact · 100`, or 0 for an empty baseline.
pub fn gain_pct(exact: f64, approx: f64) -> f64 {
    if exact == 0.0 {
        0.0
    } else {
        (exact - approx) / exact * 100.0
    }
}

/// A loaded model with its split and quantized mirror.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub model: TrainedModel,
    pub data: Dataset,
    pub split: Split,
    pub quantized: QuantizedModel,
}

impl Prepared {
    pub fn new(id: impl Into<String>, model: TrainedModel, data: Dataset, cfg: &FlowConfig) -> Result<Self> {
        cfg.validate()?;
        let split = split(&data, cfg.test_fraction, cfg.seed)?;
        if split.train.len() < 2 || split.test.len() < 2 {
            return Err(Error::InvalidArgument("each split needs at least two rows".into()));
        }
        let quantized = quantize_model(&model, cfg.input_format, cfg.weight_format, &split.train)?;
        Ok(Prepared {
            id: id.into(),
            model,
            data,
            split,
            quantized,
        })
    }

    pub fn load(model_path: &Path, data_path: &Path, cfg: &FlowConfig) -> Result<Self> {
        let model = load_model(model_path)?;
        let data = load_dataset(data_path, model.inputs, model.classes)?;
        let id = model_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        Self::new(id, model, data, cfg)
    }

    fn rows(&self, data: &Dataset) -> Vec<Vec<u64>> {
        data.features
            .iter()
            .map(|r| input_row(&self.quantized.quantize_inputs(r)))
            .collect()
    }
}

/// Test accuracy, area and power of a netlist driven by quantized test rows
/// in dataset order.
pub fn evaluate_netlist(
    p: &Prepared,
    n: &Netlist,
    phase: Phase,
    baseline: Option<&EvalReport>,
    cfg: &FlowConfig,
) -> Result<EvalReport> {
    let rows = p.rows(&p.split.test);
    let stim = PackedStimulus::new(n, &rows)?;
    let port = n
        .output("label")
        .ok_or_else(|| Error::InvalidNetlist("no `label` output".into()))?;
    let labels = stim.evaluate(n, &[]).port_values(port);
    let hits = labels
        .iter()
        .zip(&p.split.test.labels)
        .filter(|(v, l)| **v == **l as u64)
        .count();
    let a = area(n);
    let act = profile_activity(n, &stim);
    let power = power_proxy(&a, &act, cfg.static_power_coeff);
    let (area_gain_pct, power_gain_pct) = match baseline {
        Some(b) => (
            gain_pct(b.area_proxy, a.gate_equivalents),
            gain_pct(b.power_proxy, power),
        ),
        None => (0.0, 0.0),
    };
    let (battery, battery_note) = match cfg.calibration_mw_per_ge {
        Some(c) => (Some(battery_check(power, c)?), None),
        None => (None, Some("no calibration supplied; battery check skipped".to_string())),
    };
    Ok(EvalReport {
        model: p.id.clone(),
        kind: p.model.kind,
        phase,
        accuracy_test: hits as f64 / rows.len() as f64,
        gates: n.logic_gate_count(),
        area_proxy: a.gate_equivalents,
        power_proxy: power,
        area_gain_pct,
        power_gain_pct,
        battery,
        battery_note,
    })
}

/// Netlist vs software reference on `equivalence_rows` seeded random input
/// rows plus every data row.
pub fn verify(p: &Prepared, q: &QuantizedModel, n: &Netlist, cfg: &FlowConfig) -> Result<Equivalence> {
    let mut rng = rng::stream(cfg.seed, Purpose::Stimulus, 0, 0);
    let mut rows = random_code_rows(q, cfg.equivalence_rows, &mut rng);
    rows.extend(p.data.features.iter().map(|r| q.quantize_inputs(r)));
    let eq = check_equivalence(q, n, &rows)?;
    if eq.passed() {
        Ok(eq)
    } else {
        Err(Error::Equivalence {
            rows: eq.rows,
            mismatches: eq.mismatches,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub netlist: Netlist,
    pub equivalence: Equivalence,
    pub report: EvalReport,
}

pub fn run_synth(p: &Prepared, cfg: &FlowConfig) -> Result<SynthOutcome> {
    let netlist = synth_model(&p.quantized);
    let equivalence = verify(p, &p.quantized, &netlist, cfg)?;
    let report = evaluate_netlist(p, &netlist, Phase::ExactBespoke, None, cfg)?;
    Ok(SynthOutcome {
        netlist,
        equivalence,
        report,
    })
}

/// Everything that distinguishes an approximate circuit from the exact one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coefficients: Vec<CoefficientChoice>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparators: Vec<ComparatorChoice>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned_gates: Vec<PrunedGate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientChoice {
    pub layer: usize,
    pub neuron: usize,
    pub input: usize,
    pub original: i64,
    pub chosen: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorChoice {
    pub node: usize,
    pub feature: usize,
    pub original_threshold: i64,
    pub threshold: i64,
    /// Input precision: the comparison uses the top `bits` of both operands.
    pub bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunedGate {
    /// Pruning round; gate ids refer to that round's netlist.
    pub round: usize,
    pub gate: usize,
    pub value: bool,
}

#[derive(Debug, Clone)]
pub struct ApproxOutcome {
    pub exact: SynthOutcome,
    pub plan: ReplacementPlan,
    pub approx_model: QuantizedModel,
    /// Synthesized from the approximated model, before pruning.
    pub resynth: Netlist,
    pub equivalence: Equivalence,
    pub prune_log: Vec<PruneLogEntry>,
    pub netlist: Netlist,
    pub report: EvalReport,
    pub config: ApproxConfig,
    pub train_accuracy_exact: f64,
    pub train_accuracy_final: f64,
}

/// Coefficient approximation, re-synthesis with an equivalence check, then
/// gate pruning. Both stages are budgeted against the exact circuit's train
/// accuracy, so their losses do not add up beyond the budget.
pub fn run_approx(p: &Prepared, cfg: &FlowConfig) -> Result<ApproxOutcome> {
    if !p.model.kind.is_weighted_sum() {
        return Err(Error::KindMismatch {
            command: "approx".into(),
            kind: p.model.kind.name().into(),
        });
    }
    let exact = run_synth(p, cfg)?;
    let train = &p.split.train;
    let (approx_model, plan) = approximate_sums(&p.quantized, train, cfg.delta, cfg.accuracy_budget_pp)?;
    let resynth = synth_model(&approx_model);
    let equivalence = verify(p, &approx_model, &resynth, cfg)?;
    let pruned = prune(
        &resynth,
        &p.rows(train),
        &train.labels,
        PruneParams {
            budget_pp: cfg.accuracy_budget_pp,
            batch: cfg.prune_batch,
            reference_accuracy: Some(plan.train_accuracy_before),
            max_toggle_rate: cfg.prune_max_toggle_rate,
        },
    )?;
    let report = evaluate_netlist(p, &pruned.netlist, Phase::Approximated, Some(&exact.report), cfg)?;
    let config = ApproxConfig {
        model: p.id.clone(),
        coefficients: plan
            .sums
            .iter()
            .flat_map(|s| {
                s.replacements.iter().map(|r| CoefficientChoice {
                    layer: s.layer,
                    neuron: s.neuron,
                    input: r.position,
                    original: r.original,
                    chosen: r.chosen,
                })
            })
            .collect(),
        comparators: Vec::new(),
        pruned_gates: pruned
            .log
            .iter()
            .filter(|e| e.status == PruneStatus::Accepted)
            .map(|e| PrunedGate {
                round: e.round,
                gate: e.decision.gate,
                value: e.decision.replacement,
            })
            .collect(),
    };
    Ok(ApproxOutcome {
        train_accuracy_exact: plan.train_accuracy_before,
        train_accuracy_final: pruned.accuracy_after,
        exact,
        plan,
        approx_model,
        resynth,
        equivalence,
        prune_log: pruned.log,
        netlist: pruned.netlist,
        report,
        config,
    })
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub exact: SynthOutcome,
    pub result: EvolveResult,
    pub approx_model: QuantizedModel,
    pub netlist: Netlist,
    pub equivalence: Equivalence,
    pub report: EvalReport,
    pub config: ApproxConfig,
}

impl EvolveOutcome {
    pub fn comparator_area_gain_pct(&self) -> f64 {
        gain_pct(self.result.baseline_area, self.result.selected.area_proxy)
    }
}

/// Training rows split again; genomes are scored on the `test` half.
pub fn validation_split(p: &Prepared, cfg: &FlowConfig) -> Result<Split> {
    split(
        &p.split.train,
        cfg.validation_fraction,
        rng::sub_seed(cfg.seed, Purpose::Split, 1),
    )
}

/// NSGA-II on a validation split carved from the training rows, then
/// synthesis of the selected tree.
pub fn run_evolve(p: &Prepared, cfg: &FlowConfig) -> Result<EvolveOutcome> {
    if p.model.kind != ModelKind::DecisionTree {
        return Err(Error::KindMismatch {
            command: "evolve".into(),
            kind: p.model.kind.name().into(),
        });
    }
    let exact = run_synth(p, cfg)?;
    let inner = validation_split(p, cfg)?;
    let space = TreeSpace::new(&p.quantized, cfg.delta)?;
    let fitness = Fitness::new(&p.quantized, &space, &inner.test)?;
    let result = evolve(&fitness, &cfg.nsga, cfg.accuracy_budget_pp, cfg.seed)?;
    debug_assert_eq!(result.baseline_area, dt_area_proxy(&space.exact, fitness.areas()));
    let approx_model = space.apply(&p.quantized, &result.selected.genome);
    let netlist = synth_model(&approx_model);
    let equivalence = verify(p, &approx_model, &netlist, cfg)?;
    let report = evaluate_netlist(p, &netlist, Phase::Approximated, Some(&exact.report), cfg)?;
    let QuantBody::Tree(nodes) = &p.quantized.body else {
        unreachable!("kind checked above")
    };
    let comparators = space
        .nodes
        .iter()
        .zip(&result.selected.genome)
        .map(|(&i, g)| {
            let QuantNode::Internal { feature, threshold, .. } = nodes[i] else {
                unreachable!("genes map to internal nodes")
            };
            ComparatorChoice {
                node: i,
                feature,
                original_threshold: threshold,
                threshold: g.threshold,
                bits: g.bits,
            }
        })
        .collect();
    Ok(EvolveOutcome {
        exact,
        result,
        approx_model,
        netlist,
        equivalence,
        report,
        config: ApproxConfig {
            model: p.id.clone(),
            comparators,
            ..Default::default()
        },
    })
}

/// Kind-specific approximation details for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum ApproxSummary {
    CoefficientsAndPruning {
        window: i64,
        changed_weights: usize,
        multiplier_area_before: f64,
        multiplier_area_after: f64,
        pruned_gates: usize,
        train_accuracy_exact: f64,
        train_accuracy_final: f64,
    },
    Nsga2 {
        evaluations: usize,
        pareto_points: usize,
        validation_accuracy_exact: f64,
        validation_loss_pp: f64,
        comparator_area_exact: f64,
        comparator_area_selected: f64,
        comparator_area_gain_pct: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub kind: ModelKind,
    pub train_rows: usize,
    pub test_rows: usize,
    pub stratified: bool,
    pub float_accuracy_test: f64,
    pub exact_equivalence: Equivalence,
    pub approx_equivalence: Equivalence,
    pub exact: EvalReport,
    pub approximated: EvalReport,
    pub approximation: ApproxSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub config: FlowConfig,
    pub models: Vec<ModelReport>,
}

/// Files one flow run leaves behind, relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, body: impl Into<String>) {
        self.files.push((name.into(), body.into()));
    }

    fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
        s.push('\n');
        self.add(name, s);
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

fn netlist_file(p: &Prepared, tag: &str, cfg: &FlowConfig) -> String {
    format!("{}.{tag}.{}", p.id, cfg.netlist_format.extension())
}

pub fn cmd_synth(p: &Prepared, cfg: &FlowConfig) -> Result<(SynthOutcome, Artifacts)> {
    let out = run_synth(p, cfg)?;
    let mut a = Artifacts::default();
    a.add(netlist_file(p, "exact", cfg), cfg.netlist_format.render(&out.netlist));
    a.json(
        format!("{}.synth.json", p.id),
        &serde_json::json!({
            "equivalence": out.equivalence,
            "report": out.report,
        }),
    );
    Ok((out, a))
}

pub fn cmd_approx(p: &Prepared, cfg: &FlowConfig) -> Result<(ApproxOutcome, Artifacts)> {
    let out = run_approx(p, cfg)?;
    let mut a = Artifacts::default();
    a.add(
        netlist_file(p, "exact", cfg),
        cfg.netlist_format.render(&out.exact.netlist),
    );
    a.add(netlist_file(p, "approx", cfg), cfg.netlist_format.render(&out.netlist));
    a.json(format!("{}.plan.json", p.id), &out.plan);
    a.json(format!("{}.prune_log.json", p.id), &out.prune_log);
    a.json(format!("{}.approx_config.json", p.id), &out.config);
    a.json(format!("{}.approx_report.json", p.id), &model_report_approx(p, &out));
    Ok((out, a))
}

pub fn cmd_evolve(p: &Prepared, cfg: &FlowConfig) -> Result<(EvolveOutcome, Artifacts)> {
    let out = run_evolve(p, cfg)?;
    let mut a = Artifacts::default();
    a.add(
        netlist_file(p, "exact", cfg),
        cfg.netlist_format.render(&out.exact.netlist),
    );
    a.add(netlist_file(p, "approx", cfg), cfg.netlist_format.render(&out.netlist));
    a.add(format!("{}.pareto.csv", p.id), pareto_csv(&out.result.pareto));
    a.add(format!("{}.population.csv", p.id), pareto_csv(&out.result.population));
    a.json(format!("{}.selected.json", p.id), &out.config);
    a.json(format!("{}.evolve.json", p.id), &model_report_evolve(p, &out));
    Ok((out, a))
}

/// Evaluates `netlist` (or, when absent, the exact bespoke circuit) on the
/// test split, with gains relative to the exact circuit.
pub fn cmd_eval(p: &Prepared, netlist: Option<&Netlist>, cfg: &FlowConfig) -> Result<(EvalReport, Artifacts)> {
    let exact = run_synth(p, cfg)?;
    let report = match netlist {
        Some(n) => {
            n.validate()?;
            evaluate_netlist(p, n, Phase::Approximated, Some(&exact.report), cfg)?
        }
        None => exact.report,
    };
    let mut a = Artifacts::default();
    a.json(format!("{}.eval.json", p.id), &report);
    Ok((report, a))
}

fn model_report_approx(p: &Prepared, out: &ApproxOutcome) -> ModelReport {
    ModelReport {
        model: p.id.clone(),
        kind: p.model.kind,
        train_rows: p.split.train.len(),
        test_rows: p.split.test.len(),
        stratified: p.split.stratified,
        float_accuracy_test: p.model.float_accuracy(&p.split.test),
        exact_equivalence: out.exact.equivalence,
        approx_equivalence: out.equivalence,
        exact: out.exact.report.clone(),
        approximated: out.report.clone(),
        approximation: ApproxSummary::CoefficientsAndPruning {
            window: out.plan.delta,
            changed_weights: out.plan.changed_weights(),
            multiplier_area_before: out.plan.mult_area_before(),
            multiplier_area_after: out.plan.mult_area_after(),
            pruned_gates: out.config.pruned_gates.len(),
            train_accuracy_exact: out.train_accuracy_exact,
            train_accuracy_final: out.train_accuracy_final,
        },
    }
}

fn model_report_evolve(p: &Prepared, out: &EvolveOutcome) -> ModelReport {
    ModelReport {
        model: p.id.clone(),
        kind: p.model.kind,
        train_rows: p.split.train.len(),
        test_rows: p.split.test.len(),
        stratified: p.split.stratified,
        float_accuracy_test: p.model.float_accuracy(&p.split.test),
        exact_equivalence: out.exact.equivalence,
        approx_equivalence: out.equivalence,
        exact: out.exact.report.clone(),
        approximated: out.report.clone(),
        approximation: ApproxSummary::Nsga2 {
            evaluations: out.result.evaluations,
            pareto_points: out.result.pareto.len(),
            validation_accuracy_exact: out.result.baseline_accuracy,
            validation_loss_pp: out.result.selected.accuracy_loss_pp,
            comparator_area_exact: out.result.baseline_area,
            comparator_area_selected: out.result.selected.area_proxy,
            comparator_area_gain_pct: out.comparator_area_gain_pct(),
        },
    }
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "circuit",
    "exact_accuracy",
    "exact_area",
    "exact_power",
    "approx_accuracy",
    "approx_area",
    "approx_power",
    "area_gain_pct",
    "power_gain_pct",
];

pub fn summary_csv(models: &[ModelReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).expect("in-memory write");
    for m in models {
        let (e, a) = (&m.exact, &m.approximated);
        w.write_record([
            m.model.clone(),
            format!("{:.4}", e.accuracy_test),
            format!("{:.1}", e.area_proxy),
            format!("{:.2}", e.power_proxy),
            format!("{:.4}", a.accuracy_test),
            format!("{:.1}", a.area_proxy),
            format!("{:.2}", a.power_proxy),
            format!("{:.1}", a.area_gain_pct),
            format!("{:.1}", a.power_gain_pct),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Full flow for each model: exact circuit, then coefficient approximation
/// and pruning (MLP/SVM) or NSGA-II (trees). Writes both netlists per model,
/// `report.json` and `summary.csv`.
pub fn cmd_report(models: &[Prepared], cfg: &FlowConfig) -> Result<(FlowReport, Artifacts)> {
    let mut a = Artifacts::default();
    let mut reports = Vec::with_capacity(models.len());
    for p in models {
        let (exact_net, approx_net, report) = if p.model.kind == ModelKind::DecisionTree {
            let out = run_evolve(p, cfg)?;
            a.add(format!("{}.pareto.csv", p.id), pareto_csv(&out.result.pareto));
            let r = model_report_evolve(p, &out);
            (out.exact.netlist, out.netlist, r)
        } else {
            let out = run_approx(p, cfg)?;
            let r = model_report_approx(p, &out);
            (out.exact.netlist, out.netlist, r)
        };
        a.add(netlist_file(p, "exact", cfg), cfg.netlist_format.render(&exact_net));
        a.add(netlist_file(p, "approx", cfg), cfg.netlist_format.render(&approx_net));
        reports.push(report);
    }
    let report = FlowReport {
        config: cfg.clone(),
        models: reports,
    };
    a.add("summary.csv", summary_csv(&report.models));
    a.json("report.json", &report);
    Ok((report, a))
}
