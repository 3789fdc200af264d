mod common;

use common::Adj;
use jordan_core::branching::{gw_extinction_prob, mu, time_constant_gamma, BranchingSpec};
use jordan_core::growth::{GrowthParams, GrowthState, Model, StopCondition, UnderlyingTreeSpec};
use jordan_core::harness::{run, ExperimentConfig};
use jordan_core::rng::trial_rng;
use jordan_core::tracking::{track_trial, verify_trace, CenterKind, TrialSpec};
use jordan_core::tree::{
    distance, eccentricity, jordan_center_exact, neighbor_subtree_depths, NodeId, TreeArena,
};
use proptest::prelude::*;

fn arb_tree(max: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(any::<u32>(), 0..max).prop_map(|raw| {
        raw.iter()
            .enumerate()
            .map(|(i, r)| {
                let i = i + 1;
                // alternate between uniform and near-newest attachment
                if r % 3 == 0 {
                    (*r as usize / 3) % i
                } else {
                    i - 1 - (*r as usize % i.min(3))
                }
            })
            .collect()
    })
}

fn build(parents: &[usize]) -> TreeArena {
    let mut t = TreeArena::with_root(None);
    for (i, &p) in parents.iter().enumerate() {
        t.add_child(NodeId(p as u32), (i + 1) as f64, None).unwrap();
    }
    t
}

fn model_strategy() -> impl Strategy<Value = (Model, f64, u32)> {
    prop_oneof![
        (0.2f64..1.0, 2u32..5).prop_map(|(p, d)| (Model::Ic, p, d)),
        (0.1f64..1.0, 2u32..5).prop_map(|(p, d)| (Model::Dsi, p, d)),
        (2u32..5).prop_map(|d| (Model::Csi, 1.0, d)),
        Just((Model::Pa, 1.0, 2)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn center_lemma_holds_on_any_tree(parents in arb_tree(500)) {
        let t = build(&parents);
        let adj = Adj::from_parents(&parents);
        let exact = jordan_center_exact(&t).unwrap();
        let (c, psi) = adj.centers_brute();
        let got: Vec<usize> = exact.centers.iter().map(|v| v.index()).collect();
        prop_assert_eq!(got, c);
        prop_assert_eq!(exact.psi as usize, psi);
        let cs: Vec<NodeId> = exact.centers.iter().collect();
        prop_assert!(cs.len() <= 2);
        if let [a, b] = cs[..] {
            prop_assert_eq!(distance(&t, a, b).unwrap(), 1);
        }
        if t.len() >= 2 {
            for v in exact.centers.iter() {
                let d = neighbor_subtree_depths(&t, v).unwrap();
                prop_assert_eq!(d[0].1 + 1, exact.psi);
                let second = d.get(1).map_or(-1, |x| i64::from(x.1));
                prop_assert!(second == i64::from(exact.psi) - 1 || second == i64::from(exact.psi) - 2);
            }
        }
        for v in t.ids().step_by(17) {
            let d = neighbor_subtree_depths(&t, v).unwrap();
            let ecc = eccentricity(&t, v).unwrap();
            prop_assert_eq!(ecc, d.first().map_or(0, |x| x.1 + 1));
        }
    }

    #[test]
    fn growth_invariants((model, p, d) in model_strategy(), seed in any::<u64>()) {
        let params = GrowthParams::new(model, p, UnderlyingTreeSpec::Regular { d });
        let run_once = || {
            let mut rng = trial_rng(seed, 0);
            let (mut s, mut t) = GrowthState::start(&params, &mut rng).unwrap();
            let mut events = Vec::new();
            while t.len() < 150 && s.steps() < 200 {
                let batch = match model {
                    Model::Ic => s.step_ic(&mut t, &mut rng).unwrap(),
                    Model::Dsi => s.step_dsi(&mut t, &mut rng).unwrap(),
                    Model::Csi => s.csi_next(&mut t, &mut rng).unwrap().into_iter().collect(),
                    Model::Pa => vec![s.step_pa(&mut t, &mut rng).unwrap()],
                };
                events.extend(batch);
            }
            (events, t)
        };
        let (events, tree) = run_once();
        let (again, _) = run_once();
        prop_assert_eq!(&events, &again);
        tree.validate().unwrap();
        for e in &events {
            let (c, par) = (e.child, e.parent);
            prop_assert!(tree.infected_at(c) > tree.infected_at(par));
            if model == Model::Ic {
                prop_assert_eq!(tree.infected_at(c), tree.infected_at(par) + 1.0);
                prop_assert_eq!(f64::from(tree.depth(c)), tree.infected_at(c));
            }
            if model != Model::Pa {
                let cap = if par == NodeId::ROOT { d + 1 } else { d };
                prop_assert!(tree.children(par).len() as u32 <= cap);
            }
        }
        if model == Model::Csi {
            prop_assert!(events.windows(2).all(|w| w[1].time > w[0].time));
        }
    }

    #[test]
    fn tracked_traces_obey_movement_rules((model, p, d) in model_strategy(), seed in any::<u64>()) {
        let params = GrowthParams::new(model, p, UnderlyingTreeSpec::Regular { d });
        let mut stop = StopCondition::nodes(200);
        stop.max_steps = Some(500);
        let mut spec = TrialSpec::new(params, stop);
        spec.oracle_check = true;
        let t = &track_trial(&spec, seed, 0).unwrap()[0];
        prop_assert!(t.oracle_mismatches.is_empty());
        let v = verify_trace(t).unwrap();
        prop_assert!(v.passed(), "{:?}", v.failures);
        for w in t.snapshots.windows(2) {
            prop_assert!(w[1].time >= w[0].time);
        }
    }

    #[test]
    fn extinction_is_the_smallest_fixed_point(p in 0.0f64..=1.0, d in 1u32..9) {
        let s = BranchingSpec::new(p, d);
        let q = gw_extinction_prob(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!((s.pgf(q) - q).abs() <= 1e-12);
        prop_assert_eq!(q == 1.0, p * f64::from(d) <= 1.0 && p < 1.0);
        // nothing smaller is a fixed point: f(s) > s on [0, q)
        for k in 0..20 {
            let x = q * f64::from(k) / 20.0;
            if x < q - 1e-9 {
                prop_assert!(s.pgf(x) > x);
            }
        }
    }

    #[test]
    fn gamma_is_the_unique_root(d in 2u32..64) {
        let g = time_constant_gamma(d).unwrap();
        prop_assert!(g > 0.0 && g < 1.0);
        prop_assert!((mu(g, d).unwrap() - 1.0).abs() <= 1e-9);
        prop_assert!(mu(g * 0.99, d).unwrap() < 1.0);
    }
}

#[test]
fn incremental_matches_oracle_on_large_tree() {
    let params = GrowthParams::new(Model::Csi, 1.0, UnderlyingTreeSpec::Regular { d: 3 });
    let mut spec = TrialSpec::new(params, StopCondition::nodes(10_000));
    spec.oracle_check = true;
    spec.kinds = vec![CenterKind::Jordan, CenterKind::Balancedness];
    for t in track_trial(&spec, 17, 0).unwrap() {
        assert_eq!(t.snapshots.len(), 10_000);
        assert!(t.oracle_mismatches.is_empty());
    }
}

#[test]
fn aggregation_ignores_thread_count() {
    let mut cfg = ExperimentConfig::new(
        "order",
        Model::Csi,
        UnderlyingTreeSpec::Regular { d: 4 },
        1.0,
        StopCondition::nodes(80),
    );
    cfg.trials = 40;
    cfg.tail_window = 20;
    cfg.verify = true;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
    let a = one.install(|| run(&cfg).unwrap().report);
    let b = many.install(|| run(&cfg).unwrap().report);
    assert_eq!(a, b);
    let k = &a.kinds[0];
    assert_eq!(k.max_dist_histogram.values().sum::<usize>(), cfg.trials);
    assert_eq!(k.changes_histogram.values().sum::<usize>(), cfg.trials);
    assert_eq!(a.verdict_failures(), 0);
}
