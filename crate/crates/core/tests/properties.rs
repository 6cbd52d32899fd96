mod common;

use common::*;
use gscs_core::dynamics::{integrate, lyapunov_v};
use gscs_core::equilibrium::{solve, SolverOptions, StartPoint};
use gscs_core::experiment::{run_rpr_sweep, write_sweep_csv, SweepConfig};
use gscs_core::format::num;
use gscs_core::graph::tree_catalog;
use gscs_core::model::{mean_compromise, GscsParams};
use gscs_core::schemes::{SchemeKind, SchemeSpec};
use proptest::prelude::*;
use rand::Rng;

fn params(seed: u64, tree: usize) -> GscsParams {
    catalog_params(&mut rng(seed), tree, true).1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vector_field_points_into_the_box(seed in any::<u64>(), tree in 0usize..6, node in 0usize..6) {
        let p = params(seed, tree);
        let mut c = random_state(&mut rng(seed ^ 1), 6);
        c[node] = 0.0;
        prop_assert!(p.rhs(&c).unwrap()[node] >= 0.0);
        c[node] = 1.0;
        prop_assert!(p.rhs(&c).unwrap()[node] <= 0.0);
    }

    #[test]
    fn h_map_is_monotone_and_maps_into_bounds(seed in any::<u64>(), tree in 0usize..6) {
        let p = params(seed, tree);
        let mut r = rng(seed ^ 2);
        let lo_state = random_state(&mut r, 6);
        let hi_state: Vec<f64> = lo_state.iter().map(|v| v + (1.0 - v) * r.gen_range(0.0..=1.0)).collect();
        let (a, b) = (p.h_map(&lo_state).unwrap(), p.h_map(&hi_state).unwrap());
        let (lo, hi) = p.bounds();
        for i in 0..6 {
            prop_assert!(a[i] <= b[i]);
            prop_assert!(lo[i] <= a[i] && b[i] <= hi[i]);
        }
    }

    #[test]
    fn schemes_spend_the_budget(tree in 0usize..6, budget in 0.01f64..100.0, kind in 0usize..3) {
        let kind = [SchemeKind::Uniform, SchemeKind::DegreeFirst, SchemeKind::DegreeLast][kind];
        let g = tree_catalog().swap_remove(tree).1;
        let v = SchemeSpec { kind, budget }.realize(&g).unwrap();
        prop_assert!(v.iter().all(|&e| e > 0.0));
        let total: f64 = v.iter().sum();
        prop_assert!((total - budget).abs() <= 1e-12 * budget);
    }

    #[test]
    fn adding_an_edge_keeps_the_original(tree in 0usize..6, pick in any::<prop::sample::Index>()) {
        let g = tree_catalog().swap_remove(tree).1;
        let absent = g.absent_undirected_pairs();
        prop_assert_eq!(absent.len(), 10);
        let (i, j) = absent[pick.index(absent.len())];
        let h = g.add_edge(i, j, true).unwrap();
        prop_assert_eq!(h.edge_count(), g.edge_count() + 2);
        prop_assert!(h.has_edge(i, j) && h.has_edge(j, i) && !g.has_edge(i, j));
        prop_assert!(h.is_symmetric() && h.is_strongly_connected());
        prop_assert!(g.add_edge(i, j, true).is_ok());
        prop_assert!(h.add_edge(i, j, true).is_err());
    }

    #[test]
    fn limit_security_lies_strictly_inside_the_bounds(seed in any::<u64>(), tree in 0usize..6) {
        let p = params(seed, tree);
        let res = solve(&p, &SolverOptions::default()).unwrap();
        let (lo, hi) = p.bounds();
        prop_assert!(res.within_bounds);
        prop_assert!(1.0 - mean_compromise(&hi) < res.limit_security);
        prop_assert!(res.limit_security < 1.0 - mean_compromise(&lo));
    }

    #[test]
    fn bracketing_starts_agree(seed in any::<u64>(), tree in 0usize..6) {
        let p = params(seed, tree);
        let from = |s: StartPoint| solve(&p, &SolverOptions::default().with_start(s)).unwrap().c_star;
        let (a, b) = (from(StartPoint::Lower), from(StartPoint::Upper));
        prop_assert!(max_abs_diff(&a, &b) <= 1e-10);
    }

    #[test]
    fn number_format_round_trips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lyapunov_value_never_increases(seed in any::<u64>(), tree in 0usize..6) {
        let p = params(seed, tree);
        let c_star = solve(&p, &SolverOptions::default()).unwrap().c_star;
        let c0 = random_state(&mut rng(seed ^ 3), 6);
        let traj = integrate(&p, &c0, 40.0, 0.01).unwrap();
        let v: Vec<f64> = traj.states.iter().map(|s| lyapunov_v(s, &c_star).unwrap()).collect();
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-7);
        }
    }
}

#[test]
fn catalog_trees_are_pairwise_non_isomorphic() {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }
    let perms = permutations(6);
    assert_eq!(perms.len(), 720);
    let trees = tree_catalog();
    for (a, (na, ga)) in trees.iter().enumerate() {
        assert_eq!(ga.edge_count(), 10, "{na} is a tree on 6 nodes");
        assert!(ga.is_strongly_connected());
        for (nb, gb) in &trees[a + 1..] {
            let iso = perms.iter().any(|pi| (0..6).all(|i| (0..6).all(|j| ga.has_edge(i, j) == gb.has_edge(pi[i], pi[j]))));
            assert!(!iso, "{na} and {nb} are isomorphic");
        }
    }
}

#[test]
fn rk4_is_fourth_order() {
    let p = params(99, 5);
    let c0 = vec![0.9, 0.0, 0.4, 1.0, 0.2, 0.7];
    let at = |dt: f64| integrate(&p, &c0, 2.0, dt).unwrap().final_state().as_slice().to_vec();
    let reference = at(1e-4);
    let coarse = max_abs_diff(&at(0.1), &reference);
    let fine = max_abs_diff(&at(0.05), &reference);
    let ratio = coarse / fine;
    assert!((12.0..20.0).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn sweep_output_is_independent_of_thread_count() {
    let cfg = SweepConfig::rpr_default();
    let csv_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let rows = pool.install(|| run_rpr_sweep(&cfg).unwrap());
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        buf
    };
    let one = csv_with(1);
    assert_eq!(one, csv_with(4));
    assert_eq!(one, csv_with(3));
    assert_eq!(String::from_utf8(one).unwrap().lines().count(), 505);
}
