//! Gate-level pruning: gates that rarely switch on the training stimuli are
//! tied to their majority value, as long as train accuracy stays within
//! budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netlist::{profile_activity, propagate, ActivityProfile, Netlist, PackedStimulus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneDecision {
    pub gate: usize,
    /// `"CONST0"` or `"CONST1"`; always the majority value.
    #[serde(with = "const_name")]
    pub replacement: bool,
    pub toggle_rate: f64,
    pub majority: bool,
}

mod const_name {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(if *v { "CONST1" } else { "CONST0" })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match String::deserialize(d)?.as_str() {
            "CONST0" => Ok(false),
            "CONST1" => Ok(true),
            other => Err(serde::de::Error::custom(format!("unknown constant `{other}`"))),
        }
    }
}

/// Every gate, by ascending toggle rate, ties broken by gate id.
pub fn rank_gates(act: &ActivityProfile) -> Vec<PruneDecision> {
    let mut out: Vec<PruneDecision> = (0..act.len())
        .map(|g| PruneDecision {
            gate: g,
            replacement: act.majority(g),
            toggle_rate: act.toggle_rate(g),
            majority: act.majority(g),
        })
        .collect();
    // Toggle counts share one denominator, so compare them exactly.
    out.sort_by_key(|d| (act.toggles[d.gate], d.gate));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneStatus {
    Accepted,
    RolledBack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneLogEntry {
    /// Greedy round; gate ids refer to that round's netlist.
    pub round: usize,
    #[serde(flatten)]
    pub decision: PruneDecision,
    pub status: PruneStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub budget_pp: f64,
    pub batch: usize,
    /// Accuracy the budget is measured from. Defaults to the input
    /// netlist's own train accuracy; passing the unpruned baseline keeps
    /// repeated pruning from compounding the loss.
    pub reference_accuracy: Option<f64>,
    /// Only gates switching at most this often are candidates. Without a
    /// cap the greedy loop happily ties off busy gates whose train rows
    /// survive by chance, which does not carry over to unseen data.
    pub max_toggle_rate: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            budget_pp: 1.0,
            batch: 32,
            reference_accuracy: None,
            max_toggle_rate: 0.02,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub netlist: Netlist,
    pub log: Vec<PruneLogEntry>,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
    pub rounds: usize,
}

impl PruneOutcome {
    pub fn accepted(&self) -> usize {
        self.log.iter().filter(|e| e.status == PruneStatus::Accepted).count()
    }
}

/// Scores a netlist's `label` output against expected labels.
struct Scorer<'a> {
    stim: PackedStimulus,
    labels: &'a [usize],
}

impl Scorer<'_> {
    fn hits(&self, n: &Netlist, forced: &[Option<bool>]) -> usize {
        let port = n.output("label").expect("checked by prune");
        let values = self.stim.evaluate(n, forced).port_values(port);
        values
            .iter()
            .zip(self.labels)
            .filter(|(v, l)| **v == **l as u64)
            .count()
    }
}

/// Greedy batch pruning with bisecting rollback. `rows` are the training
/// stimuli in dataset order (one value per input port) and `labels` the
/// expected classes on the `label` port.
///
/// Each round profiles the current netlist, ranks its gates and tries them
/// in batches of `params.batch`; a batch that breaks the budget is bisected
/// down to single decisions. Accepted decisions are then folded in by
/// constant propagation and the next round starts. The loop stops at the
/// first round that accepts nothing.
pub fn prune(n: &Netlist, rows: &[Vec<u64>], labels: &[usize], params: PruneParams) -> Result<PruneOutcome> {
    if !(params.budget_pp >= 0.0) || params.batch == 0 {
        return Err(Error::InvalidArgument(
            "prune budget must be >= 0 and batch >= 1".into(),
        ));
    }
    if rows.len() < 2 || rows.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "pruning needs at least two labelled stimulus rows".into(),
        ));
    }
    if n.output("label").is_none() {
        return Err(Error::InvalidNetlist("no `label` output".into()));
    }
    let total = rows.len();
    let scorer = Scorer {
        stim: PackedStimulus::new(n, rows)?,
        labels,
    };
    let start_hits = scorer.hits(n, &[]);
    let reference = params.reference_accuracy.unwrap_or(start_hits as f64 / total as f64);
    let min_hits = ((reference - params.budget_pp / 100.0) * total as f64 - 1e-9)
        .ceil()
        .max(0.0) as usize;

    let mut cur = n.clone();
    let mut log = Vec::new();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let act = profile_activity(&cur, &scorer.stim);
        let ranked: Vec<PruneDecision> = rank_gates(&act)
            .into_iter()
            .filter(|d| !cur.gates[d.gate].kind.is_const() && d.toggle_rate <= params.max_toggle_rate)
            .collect();
        let mut forced: Vec<Option<bool>> = vec![None; cur.gates.len()];
        let mut accepted = Vec::new();
        for batch in ranked.chunks(params.batch) {
            try_batch(
                &scorer,
                &cur,
                &mut forced,
                batch,
                min_hits,
                rounds,
                &mut log,
                &mut accepted,
            );
        }
        if accepted.is_empty() {
            break;
        }
        cur = propagate(&cur, &accepted);
    }
    let end_hits = scorer.hits(&cur, &[]);
    Ok(PruneOutcome {
        netlist: cur,
        log,
        accuracy_before: start_hits as f64 / total as f64,
        accuracy_after: end_hits as f64 / total as f64,
        rounds,
    })
}

#[allow(clippy::too_many_arguments)]
fn try_batch(
    scorer: &Scorer,
    n: &Netlist,
    forced: &mut [Option<bool>],
    batch: &[PruneDecision],
    min_hits: usize,
    round: usize,
    log: &mut Vec<PruneLogEntry>,
    accepted: &mut Vec<(usize, bool)>,
) {
    for d in batch {
        forced[d.gate] = Some(d.replacement);
    }
    if scorer.hits(n, forced) >= min_hits {
        for d in batch {
            accepted.push((d.gate, d.replacement));
            log.push(PruneLogEntry {
                round,
                decision: *d,
                status: PruneStatus::Accepted,
            });
        }
        return;
    }
    for d in batch {
        forced[d.gate] = None;
    }
    if let [d] = batch {
        log.push(PruneLogEntry {
            round,
            decision: *d,
            status: PruneStatus::RolledBack,
        });
        return;
    }
    let (a, b) = batch.split_at(batch.len() / 2);
    try_batch(scorer, n, forced, a, min_hits, round, log, accepted);
    try_batch(scorer, n, forced, b, min_hits, round, log, accepted);
}

/// Ties every gate that never switched on `rows` to its stuck value.
pub fn prune_zero_activity(n: &Netlist, rows: &[Vec<u64>]) -> Result<Netlist> {
    let stim = PackedStimulus::new(n, rows)?;
    let act = profile_activity(n, &stim);
    let forced: Vec<(usize, bool)> = (0..act.len())
        .filter(|&g| !n.gates[g].kind.is_const())
        .filter_map(|g| act.stuck_value(g).map(|v| (g, v)))
        .collect();
    Ok(propagate(n, &forced))
}
