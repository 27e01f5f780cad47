//! Window particle counts: exact moments and distribution from the kernel, empirical
//! cumulants from samples, the central-limit report, and the conjugated-norm diagnostic.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{normalize_window, LoopFreeChain};
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, conjugate_kernel, geometric_weights, Kernel, KernelKind, NoiseParams};
use crate::linalg::{spectral_norm, HessenbergDet};
use crate::renewal::linear_fit;
use crate::sampler::{child_seed, sample_counts, SampleBatch};

/// Largest window for [`count_distribution`].
pub const MAX_DISTRIBUTION_WINDOW: usize = 512;
/// Coefficients of the count polynomial smaller than this are set to zero.
pub const CLIP_THRESHOLD: f64 = 1e-9;
/// Coefficients more negative than this indicate an invalid kernel.
pub const NEGATIVE_MASS_THRESHOLD: f64 = -1e-6;
/// Variances at or below this are reported as degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-10;
/// Relative spread under which a norm sequence counts as stable.
pub const NORM_SPREAD_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    ExactKernel,
    ExactEnumeration,
    Empirical,
}

/// Summary of the law of `N_Y`. `cumulants` holds `k₁..k₄` (unstandardized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountStatistics {
    pub mean: f64,
    pub variance: f64,
    pub distribution: Option<Vec<f64>>,
    pub cumulants: Vec<f64>,
    pub source: CountSource,
    /// Number of samples behind empirical statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

fn cumulants_from_central(mean: f64, m2: f64, m3: f64, m4: f64) -> Vec<f64> {
    vec![mean, m2, m3, m4 - 3.0 * m2 * m2]
}

impl CountStatistics {
    /// Exact statistics of a pmf on `0..len`.
    pub fn from_distribution(pmf: Vec<f64>, source: CountSource) -> Self {
        let mean: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let central = |r: i32| -> f64 {
            pmf.iter().enumerate().map(|(k, p)| (k as f64 - mean).powi(r) * p).sum()
        };
        let (m2, m3, m4) = (central(2), central(3), central(4));
        Self {
            mean,
            variance: m2,
            cumulants: cumulants_from_central(mean, m2, m3, m4),
            distribution: Some(pmf),
            source,
            samples: None,
        }
    }

    /// Sample statistics. Variance and higher cumulants are the unbiased k-statistics.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = counts.len() as f64;
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for &c in counts {
            let d = c as f64 - mean;
            let d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        let (m2, m3, m4) = (s2 / n, s3 / n, s4 / n);
        let cumulants = if counts.len() >= 4 {
            vec![
                mean,
                n / (n - 1.0) * m2,
                n * n / ((n - 1.0) * (n - 2.0)) * m3,
                n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2)
                    / ((n - 1.0) * (n - 2.0) * (n - 3.0)),
            ]
        } else {
            cumulants_from_central(mean, m2, m3, m4)
        };
        let top = counts.iter().copied().max().unwrap_or(0);
        let mut pmf = vec![0.0; top + 1];
        for &c in counts {
            pmf[c] += 1.0 / n;
        }
        Ok(Self {
            mean,
            variance: cumulants[1],
            distribution: Some(pmf),
            cumulants,
            source: CountSource::Empirical,
            samples: Some(counts.len()),
        })
    }

    /// `k₃ / k₂^{3/2}`, or `None` for a degenerate variance.
    pub fn skewness(&self) -> Option<f64> {
        let k2 = self.cumulants[1];
        (k2 > VARIANCE_FLOOR).then(|| self.cumulants[2] / k2.powf(1.5))
    }

    /// `k₄ / k₂²`, or `None` for a degenerate variance.
    pub fn excess_kurtosis(&self) -> Option<f64> {
        let k2 = self.cumulants[1];
        (k2 > VARIANCE_FLOOR).then(|| self.cumulants[3] / (k2 * k2))
    }
}

/// `E N_Y = Tr K_Y` and `Var N_Y = Tr(K_Y − K_Y²)`.
pub fn count_moments(kernel: &Kernel, window: &[usize]) -> Result<(f64, f64)> {
    if kernel.kind() != KernelKind::Correlation {
        return Err(Error::InvalidKernel("count moments need a correlation kernel".into()));
    }
    let w = normalize_window(kernel.dim(), window)?;
    Ok(window_moments(kernel.matrix(), &w, None))
}

/// Moments of the window count, optionally after Bernoulli noise, without forming `K_Y`.
fn window_moments(m: &DMatrix<f64>, w: &[usize], noise: Option<&NoiseParams>) -> (f64, f64) {
    // K^{(p,q)}_{ij} = δ_ij q_i + (1 − p_i − q_i) K_ij
    let entry = |a: usize, b: usize| {
        let (i, j) = (w[a], w[b]);
        match noise {
            None => m[(i, j)],
            Some(nz) => {
                let base = (1.0 - nz.p[i] - nz.q[i]) * m[(i, j)];
                if i == j {
                    base + nz.q[i]
                } else {
                    base
                }
            }
        }
    };
    let mut trace = 0.0;
    let mut trace_sq = 0.0;
    for a in 0..w.len() {
        let d = entry(a, a);
        trace += d;
        trace_sq += d * d;
        for b in a + 1..w.len() {
            trace_sq += 2.0 * entry(a, b) * entry(b, a);
        }
    }
    (trace, trace - trace_sq)
}

/// Coefficients of `det(I + (z − 1) K_Y) = Σ_k P(N_Y = k) zᵏ`, before any clipping.
///
/// The polynomial is sampled at the `|Y| + 1` roots of unity and inverted by a discrete
/// Fourier transform. On the unit circle `|E z^N| ≤ 1`, so the inversion is well
/// conditioned at any window size.
pub fn count_polynomial(kernel: &Kernel, window: &[usize]) -> Result<Vec<f64>> {
    if kernel.kind() != KernelKind::Correlation {
        return Err(Error::InvalidKernel("count distribution needs a correlation kernel".into()));
    }
    let ky = kernel.restrict(window)?;
    let n = ky.nrows();
    if n > MAX_DISTRIBUTION_WINDOW {
        return Err(Error::WindowTooLarge { size: n, limit: MAX_DISTRIBUTION_WINDOW });
    }
    let hd = HessenbergDet::new(&ky)?;
    let m = n + 1;
    let root = |e: usize, sign: f64| Complex64::from_polar(1.0, sign * 2.0 * PI * (e % m) as f64 / m as f64);
    let values: Vec<Complex64> = (0..m).map(|j| hd.eval(root(j, 1.0) - 1.0)).collect();
    Ok((0..m)
        .map(|k| {
            let c: Complex64 = values.iter().enumerate().map(|(j, v)| v * root(j * k, -1.0)).sum();
            c.re / m as f64
        })
        .collect())
}

/// Exact law of `N_Y` on `0..=|Y|`. Coefficients below `1e−9` are set to zero.
pub fn count_distribution(kernel: &Kernel, window: &[usize]) -> Result<Vec<f64>> {
    let raw = count_polynomial(kernel, window)?;
    raw.into_iter()
        .enumerate()
        .map(|(k, c)| {
            if c < NEGATIVE_MASS_THRESHOLD {
                Err(Error::NegativeMass { count: k, value: c })
            } else if c < CLIP_THRESHOLD {
                Ok(0.0)
            } else {
                Ok(c)
            }
        })
        .collect()
}

/// Exact statistics of `N_Y` from the kernel, including the full distribution.
pub fn exact_count_statistics(kernel: &Kernel, window: &[usize]) -> Result<CountStatistics> {
    let pmf = count_distribution(kernel, window)?;
    let (mean, variance) = count_moments(kernel, window)?;
    let mut stats = CountStatistics::from_distribution(pmf, CountSource::ExactKernel);
    stats.mean = mean;
    stats.variance = variance;
    stats.cumulants[0] = mean;
    stats.cumulants[1] = variance;
    Ok(stats)
}

/// Sample statistics of the window count over a batch.
pub fn empirical_counts(batch: &SampleBatch, window: &[usize]) -> Result<CountStatistics> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut w = window.to_vec();
    w.sort_unstable();
    w.dedup();
    let counts: Vec<usize> = batch.configs.iter().map(|c| c.count_in(&w)).collect();
    CountStatistics::from_counts(&counts)
}

/// Kolmogorov–Smirnov distance between integer counts, standardized with `mean` and `sd`,
/// and the standard normal, with the lattice point `k` compared at `k + ½`.
pub fn ks_distance(counts: &[usize], mean: f64, sd: f64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let normal = Normal::standard();
    let top = counts.iter().copied().max().unwrap_or(0);
    let mut freq = vec![0usize; top + 1];
    for &c in counts {
        freq[c] += 1;
    }
    let n = counts.len() as f64;
    let lo = counts.iter().copied().min().unwrap_or(0);
    let mut cum = 0usize;
    // below the smallest observation the empirical CDF is zero
    let mut dist = if lo > 0 { normal.cdf((lo as f64 - 0.5 - mean) / sd) } else { 0.0 };
    for (k, &f) in freq.iter().enumerate().skip(lo) {
        cum += f;
        let gap = (cum as f64 / n - normal.cdf((k as f64 + 0.5 - mean) / sd)).abs();
        dist = dist.max(gap);
    }
    Ok(dist)
}

/// One window of a central-limit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub size: usize,
    pub seed: u64,
    pub exact_mean: f64,
    /// Clipped at zero; see `raw_variance` for the computed trace.
    pub exact_variance: f64,
    pub raw_variance: f64,
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub mean_se: f64,
    pub variance_se: f64,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub ks: Option<f64>,
    pub degenerate_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub seed: u64,
    pub samples: usize,
    pub rows: Vec<CltRow>,
    pub k3_decreasing: bool,
    pub k4_decreasing: bool,
    pub ks_decreasing: bool,
    /// Log-log slope of the exact variance against window size.
    pub variance_growth_exponent: Option<f64>,
}

impl CltReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("size,mean,variance,k3,k4,ks\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.size,
                r.exact_mean,
                r.exact_variance,
                opt(r.k3),
                opt(r.k4),
                opt(r.ks)
            ));
        }
        out
    }
}

fn strictly_decreasing(vals: &[Option<f64>]) -> bool {
    vals.len() >= 2
        && vals.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b.abs() < a.abs()))
}

/// Builds the kernel and runs [`clt_report_with_kernel`].
pub fn clt_report(
    chain: &LoopFreeChain,
    noise: Option<&NoiseParams>,
    windows: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<CltReport> {
    let kernel = build_kernel(chain);
    clt_report_with_kernel(&kernel, chain, noise, windows, samples, seed)
}

/// Exact moments from `kernel` (any similarity transform of the chain's kernel), empirical
/// cumulants and KS distance from `samples` sampled counts per window.
///
/// Window `i` is sampled with `child_seed(seed, i)`, so rows do not depend on each other.
pub fn clt_report_with_kernel(
    kernel: &Kernel,
    chain: &LoopFreeChain,
    noise: Option<&NoiseParams>,
    windows: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<CltReport> {
    if kernel.dim() != chain.len() {
        return Err(Error::DimensionMismatch { expected: chain.len(), got: kernel.dim() });
    }
    if kernel.kind() != KernelKind::Correlation {
        return Err(Error::InvalidKernel("clt report needs a correlation kernel".into()));
    }
    if let Some(nz) = noise {
        if nz.len() != chain.len() {
            return Err(Error::DimensionMismatch { expected: chain.len(), got: nz.len() });
        }
    }
    if samples == 0 {
        return Err(Error::EmptyBatch);
    }
    let windows: Vec<Vec<usize>> =
        windows.iter().map(|w| normalize_window(chain.len(), w)).collect::<Result<_>>()?;
    if windows.windows(2).any(|p| p[1].len() <= p[0].len()) {
        return Err(Error::InvalidSpec("windows must strictly increase in size".into()));
    }
    let mut rows = Vec::with_capacity(windows.len());
    for (i, w) in windows.iter().enumerate() {
        let (exact_mean, raw_variance) = window_moments(kernel.matrix(), w, noise);
        if raw_variance < -VARIANCE_FLOOR {
            return Err(Error::InvalidKernel(format!(
                "negative count variance {raw_variance} on a window of size {}",
                w.len()
            )));
        }
        let exact_variance = raw_variance.max(0.0);
        let row_seed = child_seed(seed, i as u64);
        let counts = sample_counts(chain, noise, w, samples, row_seed)?;
        let emp = CountStatistics::from_counts(&counts)?;
        let n = samples as f64;
        let m4: f64 =
            counts.iter().map(|&c| (c as f64 - emp.mean).powi(4)).sum::<f64>() / n;
        let degenerate = exact_variance <= VARIANCE_FLOOR;
        let ks = if degenerate {
            None
        } else {
            Some(ks_distance(&counts, exact_mean, exact_variance.sqrt())?)
        };
        rows.push(CltRow {
            size: w.len(),
            seed: row_seed,
            exact_mean,
            exact_variance,
            raw_variance,
            empirical_mean: emp.mean,
            empirical_variance: emp.variance,
            mean_se: (emp.variance / n).sqrt(),
            variance_se: ((m4 - emp.variance * emp.variance).max(0.0) / n).sqrt(),
            k3: if degenerate { None } else { emp.skewness() },
            k4: if degenerate { None } else { emp.excess_kurtosis() },
            ks,
            degenerate_variance: degenerate,
        });
    }
    let growth: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.degenerate_variance)
        .map(|r| ((r.size as f64).ln(), r.exact_variance.ln()))
        .collect();
    let variance_growth_exponent = (growth.len() >= 2).then(|| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = growth.into_iter().unzip();
        linear_fit(&xs, &ys).0
    });
    let pick = |f: fn(&CltRow) -> Option<f64>| rows.iter().map(f).collect::<Vec<_>>();
    Ok(CltReport {
        seed,
        samples,
        k3_decreasing: strictly_decreasing(&pick(|r| r.k3)),
        k4_decreasing: strictly_decreasing(&pick(|r| r.k4)),
        ks_decreasing: strictly_decreasing(&pick(|r| r.ks)),
        variance_growth_exponent,
        rows,
    })
}

/// Least-squares rate `c` in `max_{i−j=d} |K_{ij}| ≈ C e^{−c d}` over offsets `d ≥ 1`
/// whose maximum exceeds `1e−14`. Infinite when nothing below the diagonal survives.
pub fn below_diagonal_decay_rate(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for d in 1..n {
        let peak = (d..n).map(|i| m[(i, i - d)].abs()).fold(0.0, f64::max);
        if peak > 1e-14 {
            xs.push(d as f64);
            ys.push(peak.ln());
        }
    }
    if xs.len() < 2 {
        return f64::INFINITY;
    }
    -linear_fit(&xs, &ys).0
}

/// Half the fitted below-diagonal decay rate, capped at 1.
pub fn default_alpha(kernel: &Kernel) -> f64 {
    let rate = below_diagonal_decay_rate(kernel.matrix());
    if rate.is_finite() {
        rate / 2.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub norms: Vec<f64>,
    /// `(max − min) / min` over the norm sequence.
    pub spread: f64,
    /// `norm(largest) / norm(smallest) − 1`.
    pub growth: f64,
    pub stable: bool,
    pub decay_rate: f64,
}

/// Spectral norms of the leading `n/4`, `n/2` and `n` blocks of `D K D⁻¹` with `d_i = e^{αi}`.
///
/// For a kernel built on a horizon-`n` renewal or semi-Markov chain the leading blocks are the
/// kernels of the shorter horizons, so this tracks the conjugated operator along a horizon family.
pub fn operator_norm_estimate(kernel: &Kernel, alpha: f64) -> Result<NormEstimate> {
    let n = kernel.dim();
    if n == 0 {
        return Err(Error::InvalidKernel("empty kernel".into()));
    }
    let decay_rate = below_diagonal_decay_rate(kernel.matrix());
    if alpha >= decay_rate {
        return Err(Error::AlphaTooLarge { alpha, decay_rate });
    }
    let conj = conjugate_kernel(kernel, &geometric_weights(n, alpha))?;
    let mut sizes: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&s| s > 0).collect();
    sizes.dedup();
    let norms: Vec<f64> = sizes
        .iter()
        .map(|&s| spectral_norm(&conj.matrix().view((0, 0), (s, s)).into_owned()))
        .collect();
    let max = norms.iter().copied().fold(f64::MIN, f64::max);
    let min = norms.iter().copied().fold(f64::MAX, f64::min);
    let spread = if min > 0.0 { (max - min) / min } else if max > 0.0 { f64::INFINITY } else { 0.0 };
    let first = norms[0];
    let last = norms[norms.len() - 1];
    let growth = if first > 0.0 { last / first - 1.0 } else { 0.0 };
    Ok(NormEstimate {
        alpha,
        sizes,
        norms,
        spread,
        growth,
        stable: spread < NORM_SPREAD_LIMIT,
        decay_rate,
    })
}
