use axsynth::evolve::{
    constrained_dominates, crowding_distance, dominates, dt_area_proxy, evolve, fast_nondominated_sort, pareto_csv,
    select, ComparatorAreas, DtGene, EvolveResult, Fitness, NsgaParams, ParetoPoint, TreeSpace,
};
use axsynth::fxp::{QuantBody, QuantNode, QuantizedModel};
use axsynth::model::{split, Dataset};
use axsynth::netlist::area;
use axsynth::rng::{stream, Purpose};
use axsynth::synth::synth_comparator;
use axsynth::Error;
use proptest::prelude::*;

mod common;
use common::{load, quantized, TREES};

/// Front index of every point: 0 when nothing dominates it, otherwise one
/// more than the deepest point dominating it.
fn brute_ranks(pts: &[[f64; 2]]) -> Vec<usize> {
    fn rank(i: usize, pts: &[[f64; 2]], memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(r) = memo[i] {
            return r;
        }
        let r = (0..pts.len())
            .filter(|&j| dominates(&pts[j], &pts[i]))
            .map(|j| rank(j, pts, memo) + 1)
            .max()
            .unwrap_or(0);
        memo[i] = Some(r);
        r
    }
    let mut memo = vec![None; pts.len()];
    (0..pts.len()).map(|i| rank(i, pts, &mut memo)).collect()
}

fn points() -> impl Strategy<Value = Vec<[f64; 2]>> {
    // Small integer grid so that ties and duplicates are common.
    prop::collection::vec((0u8..8, 0u8..8).prop_map(|(a, b)| [a as f64, b as f64]), 1..40)
}

proptest! {
    #[test]
    fn sort_matches_brute_force(pts in points()) {
        let fronts = fast_nondominated_sort(&pts);
        let ranks = brute_ranks(&pts);
        prop_assert_eq!(fronts.iter().map(Vec::len).sum::<usize>(), pts.len());
        for (k, f) in fronts.iter().enumerate() {
            prop_assert!(!f.is_empty());
            prop_assert!(f.windows(2).all(|w| w[0] < w[1]));
            for &i in f {
                prop_assert_eq!(ranks[i], k);
            }
        }
    }

    #[test]
    fn crowding_laws(pts in points(), shift in 0usize..40) {
        let d = crowding_distance(&pts);
        prop_assert!(d.iter().all(|&x| x >= 0.0));
        for m in 0..2 {
            let lo = pts.iter().map(|p| p[m]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p[m]).fold(f64::NEG_INFINITY, f64::max);
            for (p, x) in pts.iter().zip(&d) {
                if p[m] == lo || p[m] == hi {
                    prop_assert!(x.is_infinite());
                }
            }
        }
        // Equal points get equal distances, whatever the order.
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if pts[i] == pts[j] {
                    prop_assert_eq!(d[i], d[j]);
                }
            }
        }
        let mut rotated = pts.clone();
        rotated.rotate_left(shift % pts.len());
        let mut a = d.clone();
        let mut b = crowding_distance(&rotated);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn constrained_domination(a in (0u8..8, 0u8..8), b in (0u8..8, 0u8..8), budget in 0u8..6) {
        let (a, b) = ([a.0 as f64, a.1 as f64], [b.0 as f64, b.1 as f64]);
        let budget = budget as f64;
        let got = constrained_dominates(&a, &b, budget);
        let want = match (a[0] <= budget, b[0] <= budget) {
            (true, true) => dominates(&a, &b),
            (true, false) => true,
            (false, true) => false,
            (false, false) => a[0] < b[0],
        };
        prop_assert_eq!(got, want);
    }

    #[test]
    fn comparator_areas_match_direct_synthesis(t in 0i64..256, bits in 1u32..=8) {
        let a = ComparatorAreas::new(8);
        let direct = area(&synth_comparator((t as u64) >> (8 - bits), bits as usize)).gate_equivalents;
        prop_assert_eq!(a.area(t, bits), direct);
        prop_assert_eq!(a.area(t, bits), direct);
    }
}

/// Walks the quantized tree by hand with truncated comparisons.
fn walk(q: &QuantizedModel, codes: &[i64]) -> usize {
    let QuantBody::Tree(nodes) = &q.body else {
        unreachable!()
    };
    let full = q.input_format.total_bits;
    let mut i = 0;
    loop {
        match nodes[i] {
            QuantNode::Leaf { class } => return class,
            QuantNode::Internal {
                feature,
                threshold,
                bits,
                left,
                right,
            } => {
                let s = full - bits;
                i = if (codes[feature] >> s) >= (threshold >> s) {
                    right
                } else {
                    left
                };
            }
        }
    }
}

fn setup(name: &str) -> (QuantizedModel, Dataset) {
    let f = load(name);
    let q = quantized(&f);
    let v = split(&f.split.train, 0.3, 11).unwrap().test;
    (q, v)
}

#[test]
fn genomes_apply_truncated_comparisons() {
    for name in TREES {
        let (q, v) = setup(name);
        let space = TreeSpace::new(&q, 2).unwrap();
        assert!(space.contains(&space.exact));
        assert_eq!(space.apply(&q, &space.exact), q);
        let mut rng = stream(3, Purpose::Evolve, 9, 9);
        for _ in 0..50 {
            let g = space.random_genome(&mut rng);
            assert!(space.contains(&g));
            let m = space.apply(&q, &g);
            for row in &v.features {
                let codes = q.quantize_inputs(row);
                assert_eq!(m.infer_codes(&codes).label, walk(&m, &codes), "{name}");
            }
            let mut bad = g.clone();
            bad[0].bits = 0;
            assert!(!space.contains(&bad));
        }
        let top = q.input_format.max_code();
        for (&(lo, hi), e) in space.threshold_bounds.iter().zip(&space.exact) {
            assert!(lo >= 0 && hi <= top && lo <= e.threshold && e.threshold <= hi);
        }
    }
}

#[test]
fn fitness_against_direct_counts() {
    let (q, v) = setup("dt_wine");
    let space = TreeSpace::new(&q, 2).unwrap();
    let fit = Fitness::new(&q, &space, &v).unwrap();
    let mut rng = stream(4, Purpose::Evolve, 0, 0);
    for _ in 0..30 {
        let g = space.random_genome(&mut rng);
        let m = space.apply(&q, &g);
        let hits = v
            .features
            .iter()
            .zip(&v.labels)
            .filter(|(r, l)| walk(&m, &q.quantize_inputs(r)) == **l)
            .count();
        let acc = hits as f64 / v.len() as f64;
        let [loss, a] = fit.evaluate(&g);
        assert!((loss - (fit.baseline_accuracy() - acc) * 100.0).abs() < 1e-9);
        assert_eq!(a, dt_area_proxy(&g, fit.areas()));
    }
    assert_eq!(fit.evaluate(&space.exact)[0], 0.0);
}

fn small() -> NsgaParams {
    NsgaParams {
        pop: 20,
        gens: 12,
        ..Default::default()
    }
}

fn run(name: &str, seed: u64) -> EvolveResult {
    let (q, v) = setup(name);
    let space = TreeSpace::new(&q, 2).unwrap();
    let fit = Fitness::new(&q, &space, &v).unwrap();
    evolve(&fit, &small(), 1.0, seed).unwrap()
}

#[test]
fn evolution_invariants() {
    for name in TREES {
        let (q, v) = setup(name);
        let space = TreeSpace::new(&q, 2).unwrap();
        let fit = Fitness::new(&q, &space, &v).unwrap();
        let r = evolve(&fit, &small(), 1.0, 5).unwrap();
        assert_eq!(r.evaluations, small().pop * (small().gens + 1));
        assert_eq!(r.population.len(), small().pop);
        for p in r.pareto.iter().chain(&r.population) {
            assert!(space.contains(&p.genome), "{name}");
            assert_eq!(p.objectives(), fit.evaluate(&p.genome), "{name}");
        }
        for a in &r.pareto {
            assert_eq!(a.rank, 1);
            for b in &r.pareto {
                assert!(!dominates(&a.objectives(), &b.objectives()), "{name}");
            }
        }
        assert!(r.pareto.windows(2).all(|w| w[0].area_proxy < w[1].area_proxy));
        // Nothing the final population holds beats the reported front.
        for p in &r.population {
            assert!(
                r.pareto.iter().all(|f| !dominates(&p.objectives(), &f.objectives())),
                "{name}"
            );
        }
        assert!(r.selected.accuracy_loss_pp <= 1.0 + 1e-9);
        assert_eq!(Some(&r.selected), select(&r.pareto, 1.0));
        assert!(r.selected.area_proxy <= r.baseline_area);
        assert_eq!(r.baseline_area, dt_area_proxy(&space.exact, fit.areas()));
    }
}

#[test]
fn evolution_is_deterministic_across_thread_counts() {
    let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
    let one = pool(1).install(|| run("dt_cancer", 8));
    let four = pool(4).install(|| run("dt_cancer", 8));
    assert_eq!(one, four);
    assert_ne!(run("dt_cancer", 8).population, run("dt_cancer", 9).population);
}

#[test]
fn select_prefers_area_then_loss() {
    let p = |loss, area, t| ParetoPoint {
        genome: vec![DtGene { threshold: t, bits: 4 }],
        accuracy_loss_pp: loss,
        area_proxy: area,
        rank: 1,
        crowding: None,
    };
    let pts = vec![p(0.0, 9.0, 0), p(0.5, 4.0, 2), p(0.2, 4.0, 3), p(3.0, 1.0, 1)];
    assert_eq!(select(&pts, 1.0).unwrap().genome[0].threshold, 3);
    assert_eq!(select(&pts, 5.0).unwrap().genome[0].threshold, 1);
    assert!(select(&pts[1..2], 0.0).is_none());
}

#[test]
fn errors_and_csv() {
    let f = load("mlp_c_wine");
    let err = TreeSpace::new(&quantized(&f), 2).unwrap_err();
    assert!(matches!(err, Error::KindMismatch { .. }), "{err}");

    let (q, v) = setup("dt_iris");
    let space = TreeSpace::new(&q, 2).unwrap();
    let fit = Fitness::new(&q, &space, &v).unwrap();
    for pop in [3, 7] {
        assert!(evolve(&fit, &NsgaParams { pop, ..small() }, 1.0, 1).is_err());
    }
    assert!(evolve(
        &fit,
        &NsgaParams {
            crossover_p: 1.5,
            ..small()
        },
        1.0,
        1
    )
    .is_err());

    let r = evolve(&fit, &small(), 1.0, 2).unwrap();
    let text = pareto_csv(&r.pareto);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rd.headers().unwrap(),
        vec!["genome_hash", "accuracy_loss_pp", "area_proxy", "rank"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), r.pareto.len());
    for (row, p) in rows.iter().zip(&r.pareto) {
        assert_eq!(row[0].len(), 16);
        assert_eq!(row[2].parse::<f64>().unwrap(), p.area_proxy);
    }
}
