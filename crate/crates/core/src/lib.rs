//! Determinantal structure of loop-free Markov chains.
//!
//! The trajectory of a Markov chain that never revisits a state is a random point
//! configuration on the state space. Its correlation functions are principal minors of
//! an explicit kernel built from the hitting probabilities of the chain, which this crate
//! computes, samples, and checks against exact enumeration.

pub mod chain;
pub mod error;
pub mod generate;
pub mod kernel;
pub mod linalg;
pub mod renewal;
pub mod sampler;
pub mod stats;

pub use chain::{
    compute_hit_matrix, contract_to_window, entrance_law, validate_loop_free, ChainSpec, EntranceLaw,
    HitMatrix, Label, LoopFreeChain,
};
pub use error::{Error, ErrorClass, Result};
pub use kernel::{
    apply_bernoulli_noise, build_kernel, conjugate_kernel, correlation, gap_probability, l_ensemble,
    l_ensemble_closed_form, product_correlation, structured_determinant, Kernel, KernelKind, NoiseParams,
};
pub use renewal::{
    first_passage_distribution, renewal_chain, renewal_function, renewal_rate_fit, semi_markov_chain, Pmf,
    RenewalSpec, SemiMarkovSpec,
};
pub use sampler::{enumerate_noisy, enumerate_trajectories, sample_batch, Configuration, SampleBatch};
pub use stats::{clt_report, count_distribution, count_moments, operator_norm_estimate, CountStatistics};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes to JSON");
    digest_bytes(&bytes)
}

/// Hex SHA-256 of raw bytes.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
