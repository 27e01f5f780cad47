//! Trajectory simulation, Bernoulli noise on configurations, Monte Carlo
//! correlation estimates and exhaustive enumeration of small chains.
//!
//! Randomness: replicate `i` of a batch with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `i`. A replicate's output
//! therefore depends only on `(s, i)` and the inputs, never on how replicates
//! are spread across worker threads.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{normalize_window, LoopFreeChain};
use crate::digest;
use crate::error::{Error, Result};
use crate::kernel::NoiseParams;

/// Upper bound on the number of distinct trajectories `enumerate_trajectories` will walk.
pub const MAX_PATHS: usize = 1_000_000;

/// Largest window for exact subset distributions (`2ⁿ` entries).
pub const MAX_SUBSET_WINDOW: usize = 20;

/// A point configuration: sorted, duplicate-free state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn new(mut states: Vec<usize>) -> Self {
        states.sort_unstable();
        states.dedup();
        Self(states)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    /// True if every state of the (sorted) window is present.
    pub fn contains_all(&self, window: &[usize]) -> bool {
        window.iter().all(|&x| self.contains(x))
    }

    /// Number of points inside the window.
    pub fn count_in(&self, window: &[usize]) -> usize {
        window.iter().filter(|&&x| self.contains(x)).count()
    }

    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &x| m | 1 << x)
    }

    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|&i| mask >> i & 1 == 1).collect())
    }
}

/// The random stream of one replicate.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Derives an independent master seed for a sub-experiment (e.g. one window of a CLT sweep).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pick(weights: impl Iterator<Item = (usize, f64)>, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (x, w) in weights {
        acc += w;
        if u < acc {
            return Some(x);
        }
    }
    None
}

fn walk<R: Rng + ?Sized>(chain: &LoopFreeChain, rng: &mut R, mut visit: impl FnMut(usize) -> bool) {
    let start = rng.random::<f64>();
    let Some(mut x) = pick(chain.initial().iter().copied().enumerate(), start) else {
        return;
    };
    while visit(x) {
        let u = rng.random::<f64>();
        match pick(chain.successors(x).iter().copied(), u) {
            Some(next) => x = next,
            None => return,
        }
    }
}

/// Draws one trajectory; the empty configuration stands for a trajectory that misses the window.
pub fn sample_trajectory<R: Rng + ?Sized>(chain: &LoopFreeChain, rng: &mut R) -> Configuration {
    let mut visited = Vec::new();
    walk(chain, rng, |x| {
        visited.push(x);
        true
    });
    Configuration::new(visited)
}

/// Independent per-site deletion/insertion, one uniform draw per site in index order.
pub fn apply_noise<R: Rng + ?Sized>(
    config: &Configuration,
    noise: &NoiseParams,
    rng: &mut R,
) -> Configuration {
    let mut out = Vec::new();
    for x in 0..noise.len() {
        let u = rng.random::<f64>();
        let keep = if config.contains(x) { u >= noise.p[x] } else { u < noise.q[x] };
        if keep {
            out.push(x);
        }
    }
    Configuration(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub chain_sha256: String,
    pub noise_sha256: Option<String>,
}

/// A seeded collection of sampled configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub configs: Vec<Configuration>,
    pub meta: BatchMeta,
}

#[derive(Serialize)]
struct BatchHeader<'a> {
    seed: u64,
    samples: usize,
    chain_sha256: &'a str,
    noise_sha256: Option<&'a str>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// JSON lines: a header with seed and input hashes, then one sorted label array per configuration.
    pub fn to_json_lines(&self, chain: &LoopFreeChain) -> String {
        let header = BatchHeader {
            seed: self.seed,
            samples: self.configs.len(),
            chain_sha256: &self.meta.chain_sha256,
            noise_sha256: self.meta.noise_sha256.as_deref(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for c in &self.configs {
            let labels: Vec<_> = c.states().iter().map(|&x| chain.label(x)).collect();
            out.push_str(&serde_json::to_string(&labels).expect("labels serialize"));
            out.push('\n');
        }
        out
    }
}

/// Samples `samples` replicates in parallel, optionally passing each through Bernoulli noise.
pub fn sample_batch(
    chain: &LoopFreeChain,
    noise: Option<&NoiseParams>,
    samples: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if let Some(noise) = noise {
        if noise.len() != chain.len() {
            return Err(Error::DimensionMismatch { expected: chain.len(), got: noise.len() });
        }
    }
    let configs = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i);
            let config = sample_trajectory(chain, &mut rng);
            match noise {
                Some(noise) => apply_noise(&config, noise, &mut rng),
                None => config,
            }
        })
        .collect();
    Ok(SampleBatch {
        seed,
        configs,
        meta: BatchMeta {
            chain_sha256: digest(&chain.to_spec()),
            noise_sha256: noise.map(digest),
        },
    })
}

/// Number of (optionally noisy) points inside `window`, for each of `samples` replicates.
///
/// Only the window matters, so each trajectory is abandoned once it has moved past the
/// window's last state in topological order, and noise is drawn only on window sites.
pub fn sample_counts(
    chain: &LoopFreeChain,
    noise: Option<&NoiseParams>,
    window: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let n = chain.len();
    let window = normalize_window(n, window)?;
    if let Some(noise) = noise {
        if noise.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: noise.len() });
        }
    }
    let mut inside = vec![false; n];
    for &x in &window {
        inside[x] = true;
    }
    let last_rank = window.iter().map(|&x| chain.rank(x)).max().unwrap_or(0);
    let counts = (0..samples as u64)
        .into_par_iter()
        .map_init(
            || vec![false; n],
            |hit, i| {
                let mut rng = replicate_rng(seed, i);
                let mut touched = Vec::new();
                if !window.is_empty() {
                    walk(chain, &mut rng, |x| {
                        if chain.rank(x) > last_rank {
                            return false;
                        }
                        if inside[x] {
                            hit[x] = true;
                            touched.push(x);
                        }
                        true
                    });
                }
                let count = match noise {
                    None => touched.len(),
                    Some(noise) => window
                        .iter()
                        .filter(|&&x| {
                            let u = rng.random::<f64>();
                            if hit[x] {
                                u >= noise.p[x]
                            } else {
                                u < noise.q[x]
                            }
                        })
                        .count(),
                };
                for x in touched {
                    hit[x] = false;
                }
                count
            },
        )
        .collect();
    Ok(counts)
}

/// Fraction of configurations containing the window, with its binomial standard error.
pub fn estimate_correlation(batch: &SampleBatch, window: &[usize]) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut w = window.to_vec();
    w.sort_unstable();
    w.dedup();
    let hits = batch.configs.iter().filter(|c| c.contains_all(&w)).count();
    let n = batch.len() as f64;
    let est = hits as f64 / n;
    Ok((est, (est * (1.0 - est) / n).sqrt()))
}

/// Number of distinct trajectories (including the miss-window atom), as a float to avoid overflow.
pub fn count_trajectories(chain: &LoopFreeChain) -> f64 {
    let n = chain.len();
    let mut paths = vec![0.0f64; n];
    for &x in chain.topological_order().iter().rev() {
        let ends_here = if chain.exit_probability(x) > 0.0 { 1.0 } else { 0.0 };
        paths[x] = ends_here + chain.successors(x).iter().map(|&(j, _)| paths[j]).sum::<f64>();
    }
    let entered: f64 = chain
        .initial()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, _)| paths[x])
        .sum();
    entered + if chain.miss_probability() > 0.0 { 1.0 } else { 0.0 }
}

/// Exact distribution of the visited set, sorted by configuration.
pub fn enumerate_trajectories(chain: &LoopFreeChain) -> Result<Vec<(Configuration, f64)>> {
    let count = count_trajectories(chain);
    if count > MAX_PATHS as f64 {
        return Err(Error::TooManyPaths { count, limit: MAX_PATHS });
    }
    let mut dist: BTreeMap<Configuration, f64> = BTreeMap::new();
    let miss = chain.miss_probability();
    if miss > 0.0 {
        dist.insert(Configuration::empty(), miss);
    }
    // depth-first over paths: (state, probability of reaching it along this path, depth)
    let mut path: Vec<usize> = Vec::new();
    let mut stack: Vec<(usize, f64, usize)> = chain
        .initial()
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, &p)| (x, p, 0))
        .collect();
    while let Some((x, prob, depth)) = stack.pop() {
        path.truncate(depth);
        path.push(x);
        let exit = chain.exit_probability(x);
        if exit > 0.0 {
            *dist.entry(Configuration::new(path.clone())).or_insert(0.0) += prob * exit;
        }
        for &(j, p) in chain.successors(x).iter().rev() {
            stack.push((j, prob * p, depth + 1));
        }
    }
    Ok(dist.into_iter().collect())
}

/// Exact probabilities of all `2ⁿ` subsets of a small window, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl SubsetDistribution {
    pub fn from_configurations(n: usize, dist: &[(Configuration, f64)]) -> Result<Self> {
        if n > MAX_SUBSET_WINDOW {
            return Err(Error::WindowTooLarge { size: n, limit: MAX_SUBSET_WINDOW });
        }
        let mut probs = vec![0.0; 1 << n];
        for (c, p) in dist {
            probs[c.mask() as usize] += p;
        }
        Ok(Self { n, probs })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn probability(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `ρ(Y) = P(Y ⊆ X)` for every `Y`, by superset summation.
    pub fn correlations(&self) -> Vec<f64> {
        let mut f = self.probs.clone();
        for i in 0..self.n {
            let bit = 1usize << i;
            for mask in 0..f.len() {
                if mask & bit == 0 {
                    f[mask] += f[mask | bit];
                }
            }
        }
        f
    }

    /// `P(X ∩ window = S)` for every `S`; entries for non-submasks of `window` are zero.
    pub fn window_marginal(&self, window: u64) -> Vec<f64> {
        let mut g = vec![0.0; self.probs.len()];
        for (mask, &p) in self.probs.iter().enumerate() {
            g[mask & window as usize] += p;
        }
        g
    }

    /// Distribution of the number of points inside `window`.
    pub fn count_distribution(&self, window: u64) -> Vec<f64> {
        let mut out = vec![0.0; window.count_ones() as usize + 1];
        for (mask, &p) in self.probs.iter().enumerate() {
            out[(mask as u64 & window).count_ones() as usize] += p;
        }
        out
    }

    /// Pushes the distribution through independent per-site noise channels.
    pub fn with_noise(&self, noise: &NoiseParams) -> Result<Self> {
        if noise.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: noise.len() });
        }
        let mut f = self.probs.clone();
        for i in 0..self.n {
            let (p, q) = (noise.p[i], noise.q[i]);
            let bit = 1usize << i;
            for mask in 0..f.len() {
                if mask & bit == 0 {
                    let (empty, full) = (f[mask], f[mask | bit]);
                    f[mask] = empty * (1.0 - q) + full * p;
                    f[mask | bit] = empty * q + full * (1.0 - p);
                }
            }
        }
        Ok(Self { n: self.n, probs: f })
    }
}

/// Exact noisy-configuration distribution of a small chain.
pub fn enumerate_noisy(chain: &LoopFreeChain, noise: &NoiseParams) -> Result<SubsetDistribution> {
    if chain.len() > MAX_SUBSET_WINDOW {
        return Err(Error::WindowTooLarge { size: chain.len(), limit: MAX_SUBSET_WINDOW });
    }
    let dist = enumerate_trajectories(chain)?;
    SubsetDistribution::from_configurations(chain.len(), &dist)?.with_noise(noise)
}
