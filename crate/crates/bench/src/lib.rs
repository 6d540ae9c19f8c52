//! Deterministic fixtures shared by the benchmarks.

use metrotropy::StationarySystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible system with `n` levels: energies in `[-1, 1)`, populations
/// normalized from uniform draws.
pub fn random_system(n: usize, seed: u64) -> StationarySystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let energies: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut populations: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = populations[..n - 1].iter().sum();
    populations[n - 1] = (1.0 - head).max(0.0);
    StationarySystem::new(energies, populations).expect("populations are normalized")
}
