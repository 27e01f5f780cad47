#![allow(dead_code)]

use dppchains::generate::{random_chain, ChainShape};
use dppchains::LoopFreeChain;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random chains with `lo..=hi` states, seeded so failures shrink to a reproducible seed.
pub fn chains(lo: usize, hi: usize) -> impl Strategy<Value = LoopFreeChain> {
    (any::<u64>(), lo..=hi, 0.15f64..0.9).prop_map(|(seed, states, density)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_chain(&mut rng, ChainShape { states, density, full_row: 0.3 })
    })
}

/// Dense substochastic matrix `P` of a chain.
pub fn transition_matrix(chain: &LoopFreeChain) -> DMatrix<f64> {
    let n = chain.len();
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        for &(y, w) in chain.successors(x) {
            p[(x, y)] = w;
        }
    }
    p
}

/// Indices of the set bits of `mask`.
pub fn members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
