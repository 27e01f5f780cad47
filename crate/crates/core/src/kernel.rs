//! Correlation kernels of loop-free chains, gap probabilities, L-ensembles,
//! Bernoulli noise and diagonal conjugation.
//!
//! The kernel of a chain with hit matrix `Q` and initial distribution `π` is
//! `K[x][y] = π_x + (πQ)_x − Q[y][x]`; every principal minor of `K` is the
//! probability that the trajectory contains the corresponding set of states.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{
    compute_hit_matrix, contract_to_window, hit_intensity, normalize_window, HitMatrix, Label,
    LoopFreeChain,
};
use crate::error::{Error, Result};
use crate::linalg::{self, MAX_LU_DIM};

/// `|det(I − K_Y)|` below this is treated as a zero gap probability.
pub const DEFAULT_GAP_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Correlation,
    LEnsemble,
}

/// A square kernel matrix indexed by window states.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    states: Vec<Label>,
    matrix: DMatrix<f64>,
    kind: KernelKind,
}

/// JSON form: `{"states": [...], "kind": "correlation", "matrix": [[...], ...]}` (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub states: Vec<Label>,
    pub kind: KernelKind,
    pub matrix: Vec<Vec<f64>>,
}

impl Kernel {
    pub fn new(states: Vec<Label>, matrix: DMatrix<f64>, kind: KernelKind) -> Result<Self> {
        let n = states.len();
        if matrix.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows() });
        }
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite entry".into()));
        }
        let mut sorted: Vec<&Label> = states.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateState(w[0].to_string()));
        }
        Ok(Self { states, matrix, kind })
    }

    pub fn from_file(file: &KernelFile) -> Result<Self> {
        let n = file.states.len();
        if file.matrix.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: file.matrix.len() });
        }
        for row in &file.matrix {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| file.matrix[i][j]);
        Self::new(file.states.clone(), matrix, file.kind)
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile {
            states: self.states.clone(),
            kind: self.kind,
            matrix: self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn states(&self) -> &[Label] {
        &self.states
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[(x, y)]
    }

    /// Resolves textual labels to row indices.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                let name = name.as_ref().trim();
                self.states
                    .iter()
                    .position(|s| s.to_string() == name)
                    .ok_or_else(|| Error::UnknownState(name.to_owned()))
            })
            .collect()
    }

    /// The principal block `K_Y` for a normalized (ascending, deduplicated) window.
    pub fn restrict(&self, window: &[usize]) -> Result<DMatrix<f64>> {
        let w = normalize_window(self.dim(), window)?;
        Ok(linalg::submatrix(&self.matrix, &w))
    }

    /// Same kernel with the matrix transposed. Principal minors are unchanged.
    pub fn transposed(&self) -> Kernel {
        Kernel { states: self.states.clone(), matrix: self.matrix.transpose(), kind: self.kind }
    }

    fn require(&self, kind: KernelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidKernel(format!("expected {kind:?} kernel, got {:?}", self.kind)))
        }
    }
}

/// Builds the correlation kernel of a chain.
pub fn build_kernel(chain: &LoopFreeChain) -> Kernel {
    let q = compute_hit_matrix(chain);
    build_kernel_with(chain, &q)
}

/// Builds the kernel from a precomputed hit matrix.
pub fn build_kernel_with(chain: &LoopFreeChain, q: &HitMatrix) -> Kernel {
    let h = hit_intensity(chain, q);
    let n = chain.len();
    let matrix = DMatrix::from_fn(n, n, |x, y| h[x] - q.get(y, x));
    Kernel { states: chain.states().to_vec(), matrix, kind: KernelKind::Correlation }
}

/// Probability that the configuration contains every state of `window`: the principal minor.
///
/// The raw determinant is returned; roundoff may push it marginally outside `[0, 1]`.
pub fn correlation(kernel: &Kernel, window: &[usize]) -> Result<f64> {
    kernel.require(KernelKind::Correlation)?;
    let w = normalize_window(kernel.dim(), window)?;
    if w.len() > MAX_LU_DIM {
        return Err(Error::WindowTooLarge { size: w.len(), limit: MAX_LU_DIM });
    }
    let mut scratch = Vec::with_capacity(w.len() * w.len());
    Ok(linalg::principal_minor(kernel.matrix(), &w, &mut scratch))
}

/// The ordered-product route to the same correlation:
/// `(π_{x₁} + (πQ)_{x₁}) Q_{x₁x₂} ⋯ Q_{x_{n−1}x_n}` with the points in topological order.
pub fn product_correlation(chain: &LoopFreeChain, q: &HitMatrix, window: &[usize]) -> Result<f64> {
    let mut w = normalize_window(chain.len(), window)?;
    if w.is_empty() {
        return Ok(1.0);
    }
    w.sort_by_key(|&x| chain.rank(x));
    let first = w[0];
    let pi = chain.initial();
    let start: f64 =
        pi[first] + pi.iter().enumerate().map(|(x, &p)| p * q.get(x, first)).sum::<f64>();
    Ok(w.windows(2).fold(start, |acc, pair| acc * q.get(pair[0], pair[1])))
}

/// `det(I − K_Y)`: the probability that no point falls in the window.
pub fn gap_probability(kernel: &Kernel, window: &[usize]) -> Result<f64> {
    kernel.require(KernelKind::Correlation)?;
    let ky = kernel.restrict(window)?;
    if ky.nrows() > MAX_LU_DIM {
        return Err(Error::WindowTooLarge { size: ky.nrows(), limit: MAX_LU_DIM });
    }
    let n = ky.nrows();
    Ok(linalg::det(&(DMatrix::identity(n, n) - ky)))
}

/// `L_Y = K_Y (I − K_Y)⁻¹`, using the default singularity threshold.
pub fn l_ensemble(kernel: &Kernel, window: &[usize]) -> Result<Kernel> {
    l_ensemble_with_threshold(kernel, window, DEFAULT_GAP_THRESHOLD)
}

pub fn l_ensemble_with_threshold(kernel: &Kernel, window: &[usize], threshold: f64) -> Result<Kernel> {
    kernel.require(KernelKind::Correlation)?;
    let w = normalize_window(kernel.dim(), window)?;
    if w.len() > MAX_LU_DIM {
        return Err(Error::WindowTooLarge { size: w.len(), limit: MAX_LU_DIM });
    }
    let ky = linalg::submatrix(kernel.matrix(), &w);
    let n = w.len();
    let gap = DMatrix::identity(n, n) - &ky;
    let det = linalg::det(&gap);
    if det.abs() < threshold {
        return Err(Error::SingularGap { det });
    }
    // K_Y commutes with (I − K_Y)⁻¹
    let l = gap.lu().solve(&ky).ok_or(Error::SingularSystem)?;
    let states = w.iter().map(|&x| kernel.states()[x].clone()).collect();
    Kernel::new(states, l, KernelKind::LEnsemble)
}

/// `L_{xy} = π̃_x P_{yℱ} / π₀ − P_{yx}` computed from the contracted chain and its entrance law.
pub fn l_ensemble_closed_form(chain: &LoopFreeChain, q: &HitMatrix, window: &[usize]) -> Result<Kernel> {
    let contracted = contract_to_window(chain, q, window)?;
    let pi_zero = contracted.miss_probability();
    if pi_zero <= DEFAULT_GAP_THRESHOLD {
        return Err(Error::SingularGap { det: pi_zero });
    }
    let pi_tilde = contracted.initial();
    let exit = contracted.exit_probabilities();
    let n = contracted.len();
    let l = DMatrix::from_fn(n, n, |x, y| {
        pi_tilde[x] * exit[y] / pi_zero - contracted.transition(y, x)
    });
    Kernel::new(contracted.states().to_vec(), l, KernelKind::LEnsemble)
}

/// Per-site deletion (`p`) and insertion (`q`) probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl NoiseParams {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidProbability(format!("{name}[{i}] = {x}")));
            }
        }
        Ok(Self { p, q })
    }

    pub fn zero(n: usize) -> Self {
        Self { p: vec![0.0; n], q: vec![0.0; n] }
    }

    pub fn uniform(n: usize, p: f64, q: f64) -> Result<Self> {
        Self::new(vec![p; n], vec![q; n])
    }

    /// Noise acting only at site `x`.
    pub fn at_site(n: usize, x: usize, p: f64, q: f64) -> Result<Self> {
        let mut noise = Self::zero(n);
        if x >= n {
            return Err(Error::UnknownState(format!("#{x}")));
        }
        noise.p[x] = p;
        noise.q[x] = q;
        Self::new(noise.p, noise.q)
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.p.iter().chain(&self.q).all(|&v| v == 0.0)
    }

    /// Parameters of applying `self` and then `then` at every site.
    ///
    /// A particle survives both passes with probability `(1−p)(1−p′) + p·q′`,
    /// and an empty site ends occupied with probability `q′ + (1−p′−q′)·q`.
    pub fn compose(&self, then: &NoiseParams) -> Result<NoiseParams> {
        if self.len() != then.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: then.len() });
        }
        let mut p = Vec::with_capacity(self.len());
        let mut q = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (p1, q1, p2, q2) = (self.p[i], self.q[i], then.p[i], then.q[i]);
            let survive = (1.0 - p1) * (1.0 - p2) + p1 * q2;
            p.push((1.0 - survive).clamp(0.0, 1.0));
            q.push((q2 + (1.0 - p2 - q2) * q1).clamp(0.0, 1.0));
        }
        NoiseParams::new(p, q)
    }
}

/// `K^{(p,q)} = diag(q) + diag(1 − p − q)·K`.
pub fn apply_bernoulli_noise(kernel: &Kernel, noise: &NoiseParams) -> Result<Kernel> {
    kernel.require(KernelKind::Correlation)?;
    let n = kernel.dim();
    if noise.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: noise.len() });
    }
    let mut m = kernel.matrix().clone();
    for i in 0..n {
        let scale = 1.0 - noise.p[i] - noise.q[i];
        m.row_mut(i).scale_mut(scale);
        m[(i, i)] += noise.q[i];
    }
    Kernel::new(kernel.states().to_vec(), m, KernelKind::Correlation)
}

/// `D K D⁻¹` with `D = diag(d)`; all principal minors are preserved.
pub fn conjugate_kernel(kernel: &Kernel, weights: &[f64]) -> Result<Kernel> {
    let n = kernel.dim();
    if weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: weights.len() });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, &d)| !(d > 0.0 && d.is_finite())) {
        return Err(Error::NonpositiveWeight { index, value });
    }
    let m = DMatrix::from_fn(n, n, |i, j| weights[i] / weights[j] * kernel.get(i, j));
    Kernel::new(kernel.states().to_vec(), m, kernel.kind())
}

/// Geometric weights `d_i = e^{α i}`, `i = 1..n`, so that `K̃_{ij} = e^{α(i−j)} K_{ij}`.
///
/// Ratios are what matter; weights are shifted to stay representable for large `α n`.
pub fn geometric_weights(n: usize, alpha: f64) -> Vec<f64> {
    let mid = n as f64 / 2.0;
    (1..=n).map(|i| (alpha * (i as f64 - mid)).exp()).collect()
}

/// Closed form `a₁(a₂b₁ − c₁)(a₃b₂ − c₂)⋯(aₙb_{n−1} − c_{n−1})bₙ` of the determinant of
/// the matrix with `a_i b_j` on and above the diagonal, `c_i` on the subdiagonal and
/// arbitrary entries below it.
pub fn structured_determinant(a: &[f64], b: &[f64], c: &[f64]) -> Result<f64> {
    check_structured_lengths(a, b, c)?;
    let n = a.len();
    if n == 0 {
        return Ok(1.0);
    }
    let mut v = a[0] * b[n - 1];
    for i in 1..n {
        v *= a[i] * b[i - 1] - c[i - 1];
    }
    Ok(v)
}

/// Assembles the structured matrix; `fill(i, j)` supplies entries with `j + 1 < i`.
pub fn structured_matrix(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    mut fill: impl FnMut(usize, usize) -> f64,
) -> Result<DMatrix<f64>> {
    check_structured_lengths(a, b, c)?;
    let n = a.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            a[i] * b[j]
        } else if j + 1 == i {
            c[j]
        } else {
            fill(i, j)
        }
    }))
}

fn check_structured_lengths(a: &[f64], b: &[f64], c: &[f64]) -> Result<()> {
    let n = a.len();
    if b.len() != n || c.len() + 1 != n.max(1) {
        return Err(Error::LengthMismatch(format!(
            "need |a| = |b| = n and |c| = n - 1, got {}, {}, {}",
            n,
            b.len(),
            c.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::compute_hit_matrix;
    use approx::assert_abs_diff_eq;

    fn diamond() -> LoopFreeChain {
        LoopFreeChain::new(
            vec![1.into(), 2.into(), 3.into()],
            &[(0, 1, 0.5), (0, 2, 0.5), (1, 2, 1.0)],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    fn assert_matrix(m: &DMatrix<f64>, expected: &[&[f64]], tol: f64) {
        assert_eq!(m.nrows(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(m[(i, j)], v, epsilon = tol);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let two = LoopFreeChain::new(vec![1.into(), 2.into()], &[(0, 1, 1.0)], vec![1.0, 0.0])
            .unwrap();
        assert_matrix(build_kernel(&two).matrix(), &[&[1.0, 1.0], &[0.0, 1.0]], 0.0);
        let k = build_kernel(&diamond());
        assert_matrix(k.matrix(), &[&[1.0, 1.0, 1.0], &[0.0, 0.5, 0.5], &[0.0, 0.0, 1.0]], 1e-15);
    }

    #[test]
    fn kernel_without_initial_mass_is_minus_q_transpose() {
        let c = LoopFreeChain::new(
            vec![1.into(), 2.into(), 3.into()],
            &[(0, 1, 0.5), (0, 2, 0.5), (1, 2, 1.0)],
            vec![0.0; 3],
        )
        .unwrap();
        let q = compute_hit_matrix(&c);
        assert_eq!(build_kernel(&c).matrix(), &(-q.matrix().transpose()));
    }

    #[test]
    fn correlation_examples() {
        let c = diamond();
        let q = compute_hit_matrix(&c);
        let k = build_kernel_with(&c, &q);
        assert_abs_diff_eq!(correlation(&k, &[1, 2]).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(correlation(&k, &[]).unwrap(), 1.0);
        assert_abs_diff_eq!(correlation(&k, &[0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(correlation(&k, &[7]), Err(Error::UnknownState(_))));

        assert_abs_diff_eq!(product_correlation(&c, &q, &[1, 2]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(product_correlation(&c, &q, &[2, 1]).unwrap(), 0.5, epsilon = 1e-15);
        let h = hit_intensity(&c, &q);
        for x in 0..3 {
            assert_abs_diff_eq!(product_correlation(&c, &q, &[x]).unwrap(), h[x], epsilon = 1e-15);
        }
    }

    #[test]
    fn gap_examples() {
        let k = build_kernel(&diamond());
        assert_abs_diff_eq!(gap_probability(&k, &[1]).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(gap_probability(&k, &[2]).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(gap_probability(&k, &[]).unwrap(), 1.0);
    }

    #[test]
    fn l_ensemble_examples() {
        let c = diamond();
        let q = compute_hit_matrix(&c);
        let k = build_kernel_with(&c, &q);
        let l = l_ensemble(&k, &[1]).unwrap();
        assert_eq!(l.kind(), KernelKind::LEnsemble);
        assert_abs_diff_eq!(l.get(0, 0), 1.0, epsilon = 1e-15);
        assert!(matches!(l_ensemble(&k, &[2]), Err(Error::SingularGap { .. })));

        let zero = Kernel::new(vec![1.into()], DMatrix::zeros(1, 1), KernelKind::Correlation).unwrap();
        assert_eq!(l_ensemble(&zero, &[0]).unwrap().get(0, 0), 0.0);

        let closed = l_ensemble_closed_form(&c, &q, &[1]).unwrap();
        assert_abs_diff_eq!(closed.get(0, 0), 1.0, epsilon = 1e-15);
        assert!(matches!(l_ensemble_closed_form(&c, &q, &[1, 2]), Err(Error::SingularGap { .. })));

        let single = LoopFreeChain::new(vec![1.into()], &[], vec![0.3]).unwrap();
        let sq = compute_hit_matrix(&single);
        let closed = l_ensemble_closed_form(&single, &sq, &[0]).unwrap();
        assert_abs_diff_eq!(closed.get(0, 0), 0.3 / 0.7, epsilon = 1e-15);
        let via_k = l_ensemble(&build_kernel(&single), &[0]).unwrap();
        assert_abs_diff_eq!(via_k.get(0, 0), 0.3 / 0.7, epsilon = 1e-15);
    }

    #[test]
    fn l_ensemble_requires_correlation_kernel() {
        let k = build_kernel(&diamond());
        let l = l_ensemble(&k, &[1]).unwrap();
        assert!(matches!(l_ensemble(&l, &[0]), Err(Error::InvalidKernel(_))));
        assert!(matches!(correlation(&l, &[0]), Err(Error::InvalidKernel(_))));
    }

    #[test]
    fn noise_special_cases() {
        let k = build_kernel(&diamond());
        let same = apply_bernoulli_noise(&k, &NoiseParams::zero(3)).unwrap();
        assert_eq!(same, k);

        let q = vec![0.2, 0.7, 0.4];
        let p: Vec<f64> = q.iter().map(|v| 1.0 - v).collect();
        let indep = apply_bernoulli_noise(&k, &NoiseParams::new(p, q.clone()).unwrap()).unwrap();
        let want = DMatrix::from_diagonal(&q.into());
        assert!((indep.matrix() - want).amax() < 1e-15);

        let hole = apply_bernoulli_noise(&k, &NoiseParams::uniform(3, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(hole.matrix(), &(DMatrix::identity(3, 3) - k.matrix()));

        assert!(matches!(
            apply_bernoulli_noise(&k, &NoiseParams::zero(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(NoiseParams::new(vec![1.5], vec![0.0]).is_err());
    }

    #[test]
    fn noise_composition() {
        let k = build_kernel(&diamond());
        let a = NoiseParams::at_site(3, 0, 0.3, 0.2).unwrap();
        let b = NoiseParams::at_site(3, 2, 0.1, 0.6).unwrap();
        let joint = NoiseParams::new(vec![0.3, 0.0, 0.1], vec![0.2, 0.0, 0.6]).unwrap();
        let ab = apply_bernoulli_noise(&apply_bernoulli_noise(&k, &a).unwrap(), &b).unwrap();
        let ba = apply_bernoulli_noise(&apply_bernoulli_noise(&k, &b).unwrap(), &a).unwrap();
        let j = apply_bernoulli_noise(&k, &joint).unwrap();
        assert!((ab.matrix() - j.matrix()).amax() < 1e-15);
        assert!((ba.matrix() - j.matrix()).amax() < 1e-15);

        let first = NoiseParams::uniform(3, 0.3, 0.2).unwrap();
        let second = NoiseParams::uniform(3, 0.25, 0.5).unwrap();
        let twice =
            apply_bernoulli_noise(&apply_bernoulli_noise(&k, &first).unwrap(), &second).unwrap();
        let once = apply_bernoulli_noise(&k, &first.compose(&second).unwrap()).unwrap();
        assert!((twice.matrix() - once.matrix()).amax() < 1e-15);
    }

    #[test]
    fn conjugation_examples() {
        let k = Kernel::new(
            vec![1.into(), 2.into()],
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            KernelKind::Correlation,
        )
        .unwrap();
        let kt = conjugate_kernel(&k, &[2.0, 1.0]).unwrap();
        assert_matrix(kt.matrix(), &[&[1.0, 2.0], &[0.0, 1.0]], 0.0);
        assert_eq!(linalg::det(kt.matrix()), 1.0);
        assert_eq!(conjugate_kernel(&k, &[1.0, 1.0]).unwrap(), k);
        assert!(matches!(
            conjugate_kernel(&k, &[1.0, 0.0]),
            Err(Error::NonpositiveWeight { index: 1, .. })
        ));

        let dk = build_kernel(&diamond());
        let alpha: f64 = 0.5;
        let w: Vec<f64> = (1..=3).map(|i| (alpha * i as f64).exp()).collect();
        let conj = conjugate_kernel(&dk, &w).unwrap();
        let before = linalg::all_principal_minors(dk.matrix());
        let after = linalg::all_principal_minors(conj.matrix());
        for (x, y) in before.iter().zip(&after) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn structured_determinant_examples() {
        assert_eq!(structured_determinant(&[1.0, 2.0], &[3.0, 4.0], &[5.0]).unwrap(), 4.0);
        let m = structured_matrix(&[1.0, 2.0], &[3.0, 4.0], &[5.0], |_, _| 0.0).unwrap();
        assert_abs_diff_eq!(linalg::det(&m), 4.0, epsilon = 1e-14);
        assert_eq!(structured_determinant(&[1.5], &[-2.0], &[]).unwrap(), -3.0);

        let (a, b, c) = ([0.5, -1.0, 2.0], [1.5, 0.25, -0.75], [0.3, -1.2]);
        let closed = structured_determinant(&a, &b, &c).unwrap();
        let m1 = structured_matrix(&a, &b, &c, |_, _| 7.0).unwrap();
        let m2 = structured_matrix(&a, &b, &c, |_, _| -3.25).unwrap();
        assert_abs_diff_eq!(linalg::det(&m1), closed, epsilon = 1e-13);
        assert_abs_diff_eq!(linalg::det(&m2), closed, epsilon = 1e-13);

        assert!(matches!(
            structured_determinant(&[1.0, 2.0], &[1.0], &[1.0]),
            Err(Error::LengthMismatch(_))
        ));
    }

    #[test]
    fn kernel_file_round_trip() {
        let k = build_kernel(&diamond());
        let json = serde_json::to_string(&k.to_file()).unwrap();
        let back: KernelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(Kernel::from_file(&back).unwrap(), k);
        assert!(json.contains("\"kind\":\"correlation\""));
    }
}
