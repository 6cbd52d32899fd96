//! Random parameter and graph generators shared by the integration tests.

#![allow(dead_code)]

use gscs_core::graph::{tree_catalog, Graph};
use gscs_core::model::{GscsParams, InfectionFunction, TechLevels};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_levels(rng: &mut TestRng) -> TechLevels {
    TechLevels::new(
        rng.gen_range(0.05..=1.0),
        rng.gen_range(0.05..=1.0),
        rng.gen_range(0.5..=2.0),
        rng.gen_range(0.5..=2.0),
    )
}

/// Random valid parameters on `graph`. With `allow_zero_attack`, roughly one
/// node in five gets `x_i = 0` (at least one node stays attacked).
pub fn random_params_on(rng: &mut TestRng, graph: Graph, allow_zero_attack: bool) -> GscsParams {
    let n = graph.n();
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..=1.0)).collect();
    if allow_zero_attack {
        let keep = rng.gen_range(0..n);
        for (i, xi) in x.iter_mut().enumerate() {
            if i != keep && rng.gen_bool(0.2) {
                *xi = 0.0;
            }
        }
    }
    let y = (0..n).map(|_| rng.gen_range(0.2..=1.0)).collect();
    let z = (0..n).map(|_| rng.gen_range(0.2..=1.0)).collect();
    GscsParams::new(random_levels(rng), x, y, z, graph, InfectionFunction::Rational).expect("generated params are valid")
}

/// Catalog tree `k mod 6` with random parameters.
pub fn catalog_params(rng: &mut TestRng, k: usize, allow_zero_attack: bool) -> (String, GscsParams) {
    let (name, g) = tree_catalog().swap_remove(k % 6);
    (name, random_params_on(rng, g, allow_zero_attack))
}

/// Random Hamiltonian cycle plus independent extra arcs with probability `p`.
pub fn random_strong_digraph(rng: &mut TestRng, n: usize, p: f64) -> Graph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (order[k], order[(k + 1) % n])).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && !edges.contains(&(i, j)) && rng.gen_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges, false).expect("cycle makes it strongly connected")
}

pub fn random_state(rng: &mut TestRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
