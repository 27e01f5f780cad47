//! Random loop-free chains for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::chain::{Label, LoopFreeChain};

/// Shape of a random chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainShape {
    pub states: usize,
    /// Probability that each forward pair carries an edge.
    pub density: f64,
    /// Probability that a row (or `π`) is made fully stochastic instead of deficient.
    pub full_row: f64,
}

/// A random chain whose topological order is a random permutation of the indices.
///
/// Row deficits and the `π` deficit are drawn independently, so both the exit state and
/// the empty configuration occur.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, shape: ChainShape) -> LoopFreeChain {
    let n = shape.states;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut transitions = Vec::new();
    for a in 0..n {
        let targets: Vec<usize> = (a + 1..n).filter(|_| rng.random::<f64>() < shape.density).collect();
        let weights: Vec<f64> = targets.iter().map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = weights.iter().sum();
        let mass = row_mass(rng, shape.full_row);
        for (&b, w) in targets.iter().zip(weights) {
            transitions.push((order[a], order[b], w / total * mass));
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mass = row_mass(rng, shape.full_row);
    let initial = raw.iter().map(|p| p / total * mass).collect();
    let states = (1..=n as i64).map(Label::Int).collect();
    LoopFreeChain::new(states, &transitions, initial).expect("generated chain is valid")
}

fn row_mass<R: Rng + ?Sized>(rng: &mut R, full_row: f64) -> f64 {
    if rng.random::<f64>() < full_row {
        1.0
    } else {
        rng.random_range(0.2..1.0)
    }
}
