//! Seeded dataset generators shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tomdss_core::tom::{Cpds, Dag, Node, Observation};

pub fn obs(rows: &[[usize; 4]]) -> Vec<Observation> {
    rows.iter().map(|r| Observation(*r)).collect()
}

pub fn dag_with_action_parents(pa: &[usize]) -> Dag {
    let edges: Vec<(Node, Node)> = pa.iter().map(|&p| (Node::from_index(p), Node::Action)).collect();
    Dag::from_edges(&edges).unwrap()
}

pub fn action_parent_indices(dag: &Dag) -> Vec<usize> {
    dag.parents(Node::Action).iter().map(|n| n.index()).collect()
}

/// Data where the action follows a random rule of a random parent subset, with noise.
pub fn structured_rows(seed: u64, n: usize) -> Vec<[usize; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask: u8 = rng.random_range(0..8);
    let table: Vec<f64> = (0..27).map(|_| rng.random::<f64>()).collect();
    (0..n)
        .map(|_| {
            let x = [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)];
            let cell: usize = (0..3).map(|f| if mask & (1 << f) != 0 { x[f] * 3usize.pow(f as u32) } else { 0 }).sum();
            [x[0], x[1], x[2], rng.random_bool(table[cell]) as usize]
        })
        .collect()
}

/// Samples from the ground truth {bomb_type -> action, time -> action}.
pub fn ground_truth_rows(seed: u64, n: usize) -> Vec<[usize; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_call = [[0.1, 0.2, 0.3], [0.2, 0.6, 0.9], [0.7, 0.85, 0.95]];
    (0..n)
        .map(|_| {
            let (b, d, t) = (rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3));
            [b, d, t, rng.random_bool(p_call[b][t]) as usize]
        })
        .collect()
}

pub fn random_cpds(dag: &Dag, rng: &mut ChaCha8Rng) -> Cpds {
    let mut cpds = Cpds::with_prior(dag, 2.0);
    for node in cpds.nodes.iter_mut() {
        for (counts, probs) in node.counts.iter_mut().zip(node.probs.iter_mut()) {
            let raw: Vec<f64> = counts.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
            let z: f64 = raw.iter().sum();
            *counts = raw.clone();
            *probs = raw.iter().map(|x| x / z).collect();
        }
    }
    cpds
}
