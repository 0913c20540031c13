//! Shared fixtures for the benchmark suite: seeded networks and input
//! batches sized like the workloads the pipeline actually runs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use symkan::{KanNetwork, SplineGrid};

/// A freshly initialized network on the default edge grid.
pub fn seeded_network(shape: &[usize], seed: u64) -> KanNetwork {
    let grid = SplineGrid::default_edge_grid();
    KanNetwork::init(shape, &grid, seed).expect("valid shape")
}

/// Uniform rows in the normalized input box, plus matching targets.
pub fn training_batch(n_in: usize, rows: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ys: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (xs, ys)
}
