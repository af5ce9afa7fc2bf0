//! NSGA-II over per-comparator threshold and precision choices of a
//! quantized decision tree. Objectives, both minimized: validation accuracy
//! loss in percentage points and the summed area of the node comparators.

use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::Mutex;

use fnv::FnvHasher;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxp::{QuantBody, QuantNode, QuantizedModel};
use crate::model::Dataset;
use crate::netlist::area;
use crate::rng::{stream, Purpose};
use crate::synth::synth_comparator;

/// Phenotype of one internal node: the node compares the top `bits` of its
/// feature against the top `bits` of `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DtGene {
    pub threshold: i64,
    pub bits: u32,
}

pub type Genome = Vec<DtGene>;

/// Comparator areas memoized by `(truncated threshold, bits)`.
#[derive(Debug)]
pub struct ComparatorAreas {
    full_bits: u32,
    memo: Mutex<HashMap<(u64, u32), f64>>,
}

impl ComparatorAreas {
    pub fn new(full_bits: u32) -> Self {
        ComparatorAreas {
            full_bits,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Area of `[x >= t]` on the top `bits` of a `full_bits` operand.
    pub fn area(&self, threshold: i64, bits: u32) -> f64 {
        let t = (threshold as u64) >> (self.full_bits - bits);
        if let Some(&a) = self.memo.lock().unwrap().get(&(t, bits)) {
            return a;
        }
        let a = area(&synth_comparator(t, bits as usize)).gate_equivalents;
        self.memo.lock().unwrap().insert((t, bits), a);
        a
    }
}

/// Summed comparator area of a genome.
pub fn dt_area_proxy(genome: &[DtGene], areas: &ComparatorAreas) -> f64 {
    genome.iter().map(|g| areas.area(g.threshold, g.bits)).sum()
}

/// The genes a tree admits: one per internal node, thresholds within
/// `±delta` of the quantized original and clamped to the input codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpace {
    /// Index into the tree's node array of each gene's node.
    pub nodes: Vec<usize>,
    pub exact: Genome,
    pub threshold_bounds: Vec<(i64, i64)>,
    pub full_bits: u32,
}

impl TreeSpace {
    pub fn new(q: &QuantizedModel, delta: i64) -> Result<Self> {
        let QuantBody::Tree(tree) = &q.body else {
            return Err(Error::KindMismatch {
                command: "evolve".into(),
                kind: q.kind.name().into(),
            });
        };
        let full_bits = q.input_format.total_bits;
        let top = q.input_format.max_code();
        let mut space = TreeSpace {
            nodes: Vec::new(),
            exact: Vec::new(),
            threshold_bounds: Vec::new(),
            full_bits,
        };
        for (i, node) in tree.iter().enumerate() {
            if let QuantNode::Internal { threshold, bits, .. } = *node {
                space.nodes.push(i);
                space.exact.push(DtGene { threshold, bits });
                space
                    .threshold_bounds
                    .push(((threshold - delta).max(0), (threshold + delta).min(top)));
            }
        }
        Ok(space)
    }

    /// One gene per internal node.
    pub fn gene_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn random_gene(&self, i: usize, rng: &mut ChaCha8Rng) -> DtGene {
        DtGene {
            threshold: self.random_threshold(i, rng),
            bits: self.random_bits(rng),
        }
    }

    pub fn random_threshold(&self, i: usize, rng: &mut ChaCha8Rng) -> i64 {
        let (lo, hi) = self.threshold_bounds[i];
        rng.gen_range(lo..=hi)
    }

    pub fn random_bits(&self, rng: &mut ChaCha8Rng) -> u32 {
        rng.gen_range(1..=self.full_bits)
    }

    pub fn random_genome(&self, rng: &mut ChaCha8Rng) -> Genome {
        (0..self.nodes.len()).map(|i| self.random_gene(i, rng)).collect()
    }

    pub fn contains(&self, genome: &[DtGene]) -> bool {
        genome.len() == self.nodes.len()
            && genome
                .iter()
                .zip(&self.threshold_bounds)
                .all(|(g, &(lo, hi))| (lo..=hi).contains(&g.threshold) && (1..=self.full_bits).contains(&g.bits))
    }

    /// The tree with the genome's thresholds and precisions.
    pub fn apply(&self, q: &QuantizedModel, genome: &[DtGene]) -> QuantizedModel {
        let mut out = q.clone();
        if let QuantBody::Tree(tree) = &mut out.body {
            for (&i, g) in self.nodes.iter().zip(genome) {
                if let QuantNode::Internal { threshold, bits, .. } = &mut tree[i] {
                    *threshold = g.threshold;
                    *bits = g.bits;
                }
            }
        }
        out
    }
}

/// Stable 64-bit FNV-1a digest of a genome, for export.
pub fn genome_hash(genome: &[DtGene]) -> String {
    let mut h = FnvHasher::default();
    for g in genome {
        h.write(&g.threshold.to_le_bytes());
        h.write(&g.bits.to_le_bytes());
    }
    format!("{:016x}", h.finish())
}

/// `a` dominates `b`: no worse in every objective, better in one.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Deb's fast non-dominated sort. Fronts hold point indices in ascending
/// order; the first front is the non-dominated set.
pub fn fast_nondominated_sort(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    sort_fronts(points, dominates)
}

/// Deb's constrained domination with feasibility `loss <= budget`: any
/// feasible point beats any infeasible one, infeasible points compare by
/// excess loss, feasible points by plain dominance.
pub fn constrained_dominates(a: &[f64; 2], b: &[f64; 2], budget_pp: f64) -> bool {
    let excess = |p: &[f64; 2]| (p[0] - budget_pp - 1e-9).max(0.0);
    match (excess(a), excess(b)) {
        (ea, eb) if ea == 0.0 && eb == 0.0 => dominates(a, b),
        (ea, eb) => ea < eb,
    }
}

fn sort_fronts(points: &[[f64; 2]], dominates: impl Fn(&[f64; 2], &[f64; 2]) -> bool) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if dominates(&points[i], &points[j]) {
                dominated_by[i].push(j);
            } else if dominates(&points[j], &points[i]) {
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point of one front. Per objective, points at
/// the extreme values get +inf and the others the normalized gap between
/// the nearest distinct values on either side, so duplicates share a value.
pub fn crowding_distance(front: &[[f64; 2]]) -> Vec<f64> {
    let mut d = vec![0.0; front.len()];
    for m in 0..2 {
        let mut values: Vec<f64> = front.iter().map(|p| p[m]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let (lo, hi) = (values[0], values[values.len() - 1]);
        for (i, p) in front.iter().enumerate() {
            let v = p[m];
            if v == lo || v == hi {
                d[i] = f64::INFINITY;
                continue;
            }
            let k = values.partition_point(|&x| x < v);
            d[i] += (values[k + 1] - values[k - 1]) / (hi - lo);
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsgaParams {
    pub pop: usize,
    pub gens: usize,
    pub crossover_p: f64,
    /// Per-gene mutation probability; `None` means `1 / gene_count`.
    pub mutation_p: Option<f64>,
}

impl Default for NsgaParams {
    fn default() -> Self {
        NsgaParams {
            pop: 100,
            gens: 100,
            crossover_p: 0.9,
            mutation_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub genome: Genome,
    pub accuracy_loss_pp: f64,
    pub area_proxy: f64,
    /// Front index, 1-based.
    pub rank: usize,
    /// `None` stands for +infinity.
    pub crowding: Option<f64>,
}

impl ParetoPoint {
    pub fn objectives(&self) -> [f64; 2] {
        [self.accuracy_loss_pp, self.area_proxy]
    }
}

/// Objective evaluation for one tree against a validation set.
pub struct Fitness<'a> {
    q: &'a QuantizedModel,
    space: &'a TreeSpace,
    areas: ComparatorAreas,
    codes: Vec<Vec<i64>>,
    labels: Vec<usize>,
    baseline: f64,
}

impl<'a> Fitness<'a> {
    pub fn new(q: &'a QuantizedModel, space: &'a TreeSpace, validation: &Dataset) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::InvalidArgument("empty validation set".into()));
        }
        let mut f = Fitness {
            q,
            space,
            areas: ComparatorAreas::new(space.full_bits),
            codes: validation.features.iter().map(|r| q.quantize_inputs(r)).collect(),
            labels: validation.labels.clone(),
            baseline: 0.0,
        };
        f.baseline = f.accuracy(&space.exact);
        Ok(f)
    }

    pub fn baseline_accuracy(&self) -> f64 {
        self.baseline
    }

    pub fn areas(&self) -> &ComparatorAreas {
        &self.areas
    }

    pub fn accuracy(&self, genome: &[DtGene]) -> f64 {
        let model = self.space.apply(self.q, genome);
        let hits = self
            .codes
            .iter()
            .zip(&self.labels)
            .filter(|(c, &l)| model.infer_codes(c).label == l)
            .count();
        hits as f64 / self.labels.len() as f64
    }

    /// `[accuracy loss in pp, comparator area]`.
    pub fn evaluate(&self, genome: &[DtGene]) -> [f64; 2] {
        [
            (self.baseline - self.accuracy(genome)) * 100.0,
            dt_area_proxy(genome, &self.areas),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveResult {
    /// Non-dominated set over every genome evaluated, by ascending area.
    pub pareto: Vec<ParetoPoint>,
    /// Final population with ranks and crowding.
    pub population: Vec<ParetoPoint>,
    pub selected: ParetoPoint,
    pub baseline_accuracy: f64,
    pub baseline_area: f64,
    pub evaluations: usize,
}

struct Archive {
    index: HashMap<Genome, usize>,
    points: Vec<(Genome, [f64; 2])>,
}

impl Archive {
    fn new() -> Self {
        Archive {
            index: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn add(&mut self, genomes: &[Genome], objs: &[[f64; 2]]) {
        for (g, o) in genomes.iter().zip(objs) {
            if !self.index.contains_key(g) {
                self.index.insert(g.clone(), self.points.len());
                self.points.push((g.clone(), *o));
            }
        }
    }

    /// Non-dominated points, one per objective vector (the smallest
    /// genome), by ascending area.
    fn pareto(&self) -> Vec<ParetoPoint> {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| {
            let (ga, oa) = &self.points[a];
            let (gb, ob) = &self.points[b];
            oa[0].total_cmp(&ob[0]).then(oa[1].total_cmp(&ob[1])).then(ga.cmp(gb))
        });
        // Sweep by ascending loss: a point survives iff it beats every
        // earlier area strictly.
        let mut front = Vec::new();
        let mut best_area = f64::INFINITY;
        for i in order {
            if self.points[i].1[1] < best_area {
                best_area = self.points[i].1[1];
                front.push(i);
            }
        }
        let objs: Vec<[f64; 2]> = front.iter().map(|&i| self.points[i].1).collect();
        let crowd = crowding_distance(&objs);
        let mut out: Vec<ParetoPoint> = front
            .iter()
            .zip(crowd)
            .map(|(&i, c)| point(&self.points[i].0, self.points[i].1, 1, c))
            .collect();
        out.reverse();
        out
    }
}

fn point(genome: &[DtGene], o: [f64; 2], rank: usize, crowding: f64) -> ParetoPoint {
    ParetoPoint {
        genome: genome.to_vec(),
        accuracy_loss_pp: o[0],
        area_proxy: o[1],
        rank,
        crowding: crowding.is_finite().then_some(crowding),
    }
}

/// Minimum area among points within the loss budget; ties go to the lower
/// loss, then to the smaller genome.
pub fn select(points: &[ParetoPoint], budget_pp: f64) -> Option<&ParetoPoint> {
    points
        .iter()
        .filter(|p| p.accuracy_loss_pp <= budget_pp + 1e-9)
        .min_by(|a, b| {
            a.area_proxy
                .total_cmp(&b.area_proxy)
                .then(a.accuracy_loss_pp.total_cmp(&b.accuracy_loss_pp))
                .then(a.genome.cmp(&b.genome))
        })
}

/// Ranks (1-based) and crowding for a population.
fn rank_and_crowd(objs: &[[f64; 2]], budget_pp: f64) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; objs.len()];
    let mut crowd = vec![0.0; objs.len()];
    for (r, front) in sort_fronts(objs, |a, b| constrained_dominates(a, b, budget_pp))
        .iter()
        .enumerate()
    {
        let f: Vec<[f64; 2]> = front.iter().map(|&i| objs[i]).collect();
        for (&i, c) in front.iter().zip(crowding_distance(&f)) {
            rank[i] = r + 1;
            crowd[i] = c;
        }
    }
    (rank, crowd)
}

fn tournament(rng: &mut ChaCha8Rng, rank: &[usize], crowd: &[f64]) -> usize {
    let a = rng.gen_range(0..rank.len());
    let b = rng.gen_range(0..rank.len());
    let better = |x: usize, y: usize| rank[x] < rank[y] || (rank[x] == rank[y] && crowd[x] > crowd[y]);
    if better(b, a) || (a > b && !better(a, b)) {
        b
    } else {
        a
    }
}

#[allow(clippy::too_many_arguments)]
fn offspring(
    space: &TreeSpace,
    params: &NsgaParams,
    mut_p: f64,
    rng: &mut ChaCha8Rng,
    pop: &[Genome],
    rank: &[usize],
    crowd: &[f64],
    seen: &HashMap<Genome, usize>,
) -> [Genome; 2] {
    let mut a = pop[tournament(rng, rank, crowd)].clone();
    let mut b = pop[tournament(rng, rank, crowd)].clone();
    if rng.gen_bool(params.crossover_p) {
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            if rng.gen_bool(0.5) {
                std::mem::swap(x, y);
            }
        }
    }
    for child in [&mut a, &mut b] {
        for (i, g) in child.iter_mut().enumerate() {
            if rng.gen_bool(mut_p) {
                *g = space.random_gene(i, rng);
            }
        }
        // A child already evaluated wastes its evaluation; nudge one gene
        // at a time until it is new (or give up).
        for _ in 0..8 {
            if !seen.contains_key(child.as_slice()) || child.is_empty() {
                break;
            }
            let i = rng.gen_range(0..child.len());
            child[i] = space.random_gene(i, rng);
        }
    }
    [a, b]
}

/// Indices of the `size` survivors.
///
/// One individual per objective vector goes first, ranked by plain Pareto
/// fronts so that slightly infeasible but small trees survive as stepping
/// stones. The remaining places go to objective duplicates, ranked by
/// constrained domination. Without this split the population fills up
/// with copies of a few trade-offs and stops exploring.
fn environmental_selection(objs: &[[f64; 2]], size: usize, budget_pp: f64) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    let (unique, dups): (Vec<usize>, Vec<usize>) =
        (0..objs.len()).partition(|&i| seen.insert([objs[i][0].to_bits(), objs[i][1].to_bits()]));
    let mut keep = Vec::with_capacity(size);
    fill(&mut keep, size, objs, &unique, dominates);
    fill(&mut keep, size, objs, &dups, |a, b| {
        constrained_dominates(a, b, budget_pp)
    });
    keep
}

/// Adds `idx` to `keep` front by front, truncating the last front that fits
/// partially by descending crowding distance.
fn fill(
    keep: &mut Vec<usize>,
    size: usize,
    objs: &[[f64; 2]],
    idx: &[usize],
    dom: impl Fn(&[f64; 2], &[f64; 2]) -> bool,
) {
    let sub: Vec<[f64; 2]> = idx.iter().map(|&i| objs[i]).collect();
    for front in sort_fronts(&sub, dom) {
        if keep.len() >= size {
            return;
        }
        if keep.len() + front.len() <= size {
            keep.extend(front.iter().map(|&k| idx[k]));
            continue;
        }
        let f: Vec<[f64; 2]> = front.iter().map(|&k| sub[k]).collect();
        let crowd = crowding_distance(&f);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&x, &y| crowd[y].total_cmp(&crowd[x]).then(x.cmp(&y)));
        let room = size - keep.len();
        keep.extend(order.iter().take(room).map(|&k| idx[front[k]]));
        return;
    }
}

/// Runs NSGA-II. Generation 0 holds the exact genome plus `pop - 1` random
/// ones. Every random draw comes from a stream keyed by (generation,
/// individual), so the result does not depend on the thread count.
pub fn evolve(fitness: &Fitness, params: &NsgaParams, budget_pp: f64, seed: u64) -> Result<EvolveResult> {
    if params.pop < 4 || !params.pop.is_multiple_of(2) {
        return Err(Error::InvalidArgument("population must be even and at least 4".into()));
    }
    if !(0.0..=1.0).contains(&params.crossover_p) {
        return Err(Error::InvalidArgument("crossover_p must lie in [0, 1]".into()));
    }
    let space = fitness.space;
    let mut_p = params
        .mutation_p
        .unwrap_or(1.0 / space.gene_count().max(1) as f64)
        .clamp(0.0, 1.0);
    let eval = |gs: &[Genome]| -> Vec<[f64; 2]> { gs.par_iter().map(|g| fitness.evaluate(g)).collect() };

    let mut pop: Vec<Genome> = (0..params.pop)
        .map(|i| {
            if i == 0 {
                space.exact.clone()
            } else {
                space.random_genome(&mut stream(seed, Purpose::Evolve, 0, i as u32))
            }
        })
        .collect();
    let mut objs = eval(&pop);
    let mut archive = Archive::new();
    archive.add(&pop, &objs);
    let mut evaluations = pop.len();

    for gen in 0..params.gens {
        let (rank, crowd) = rank_and_crowd(&objs, budget_pp);
        let children: Vec<Genome> = (0..params.pop / 2)
            .into_par_iter()
            .flat_map_iter(|k| {
                let mut rng = stream(seed, Purpose::Evolve, gen as u32 + 1, k as u32);
                offspring(space, params, mut_p, &mut rng, &pop, &rank, &crowd, &archive.index)
            })
            .collect();
        let child_objs = eval(&children);
        evaluations += children.len();
        archive.add(&children, &child_objs);

        // Parents and children, with repeated genomes dropped unless they
        // are needed to fill the population.
        let mut all: Vec<Genome> = Vec::with_capacity(2 * params.pop);
        let mut all_objs: Vec<[f64; 2]> = Vec::with_capacity(2 * params.pop);
        let mut repeats = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (g, o) in pop.into_iter().chain(children).zip(objs.into_iter().chain(child_objs)) {
            if seen.contains(&g) {
                repeats.push((g, o));
            } else {
                seen.insert(g.clone());
                all.push(g);
                all_objs.push(o);
            }
        }
        for (g, o) in repeats.into_iter().take(params.pop.saturating_sub(all.len())) {
            all.push(g);
            all_objs.push(o);
        }
        let keep = environmental_selection(&all_objs, params.pop, budget_pp);
        pop = keep.iter().map(|&i| all[i].clone()).collect();
        objs = keep.iter().map(|&i| all_objs[i]).collect();
    }

    let (rank, crowd) = rank_and_crowd(&objs, budget_pp);
    let mut population: Vec<ParetoPoint> = (0..pop.len())
        .map(|i| point(&pop[i], objs[i], rank[i], crowd[i]))
        .collect();
    population.sort_by(|a, b| {
        a.rank
            .cmp(&b.rank)
            .then(a.area_proxy.total_cmp(&b.area_proxy))
            .then(a.accuracy_loss_pp.total_cmp(&b.accuracy_loss_pp))
            .then(a.genome.cmp(&b.genome))
    });
    let pareto = archive.pareto();
    let selected = select(&pareto, budget_pp)
        .expect("the exact genome is always within budget")
        .clone();
    Ok(EvolveResult {
        pareto,
        population,
        selected,
        baseline_accuracy: fitness.baseline_accuracy(),
        baseline_area: dt_area_proxy(&space.exact, fitness.areas()),
        evaluations,
    })
}

/// Uniform random sampling with the same evaluation count, exact genome
/// included. Returns the smallest area within budget.
pub fn random_search(fitness: &Fitness, evaluations: usize, budget_pp: f64, seed: u64) -> f64 {
    let space = fitness.space;
    (0..evaluations)
        .into_par_iter()
        .map(|i| {
            let g = if i == 0 {
                space.exact.clone()
            } else {
                space.random_genome(&mut stream(seed, Purpose::RandomSearch, 0, i as u32))
            };
            fitness.evaluate(&g)
        })
        .filter(|o| o[0] <= budget_pp + 1e-9)
        .map(|o| o[1])
        .reduce(|| f64::INFINITY, f64::min)
}

/// Pareto CSV: `genome_hash,accuracy_loss_pp,area_proxy,rank`.
pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["genome_hash", "accuracy_loss_pp", "area_proxy", "rank"])
        .expect("in-memory write");
    for p in points {
        w.write_record([
            genome_hash(&p.genome),
            p.accuracy_loss_pp.to_string(),
            p.area_proxy.to_string(),
            p.rank.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
