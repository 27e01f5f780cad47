//! Dense determinant and norm helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest matrix passed to LU-based routines.
pub const MAX_LU_DIM: usize = 2048;

/// Determinant of a row-major `n×n` buffer by partially pivoted LU. The buffer is overwritten.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for k in 0..n {
        let mut pivot = k;
        let mut best = a[k * n + k].abs();
        for r in k + 1..n {
            let v = a[r * n + k].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != k {
            for c in k..n {
                a.swap(k * n + c, pivot * n + c);
            }
            det = -det;
        }
        let d = a[k * n + k];
        det *= d;
        for r in k + 1..n {
            let f = a[r * n + k] / d;
            if f == 0.0 {
                continue;
            }
            for c in k + 1..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    det
}

/// Determinant of a dense matrix.
pub fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "determinant of a non-square matrix");
    let mut buf: Vec<f64> = m.transpose().as_slice().to_vec();
    det_in_place(&mut buf, n)
}

/// Determinant of the principal minor `idx × idx`, using `scratch` as workspace.
pub fn principal_minor(m: &DMatrix<f64>, idx: &[usize], scratch: &mut Vec<f64>) -> f64 {
    let k = idx.len();
    scratch.clear();
    for &i in idx {
        for &j in idx {
            scratch.push(m[(i, j)]);
        }
    }
    det_in_place(scratch, k)
}

/// Principal submatrix `m[idx, idx]`.
pub fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Indices of the set bits of `mask`, ascending.
pub fn mask_indices(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// All `2ⁿ` principal minors, indexed by subset bitmask (the empty minor is 1).
pub fn all_principal_minors(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert!(n < 32, "principal minor enumeration limited to n < 32");
    let mut scratch = Vec::with_capacity(n * n);
    (0..1u64 << n)
        .map(|mask| principal_minor(m, &mask_indices(mask), &mut scratch))
        .collect()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Evaluates `det(I + w·A)` for many complex `w` after a single Hessenberg reduction.
///
/// Orthogonal similarity keeps the reduction stable even for highly non-normal `A`,
/// and each evaluation is an `O(n²)` LU of an upper Hessenberg matrix.
pub struct HessenbergDet {
    h: DMatrix<f64>,
}

impl HessenbergDet {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        if n > MAX_LU_DIM {
            return Err(Error::WindowTooLarge { size: n, limit: MAX_LU_DIM });
        }
        let h = if n < 2 { a.clone() } else { a.clone().hessenberg().h() };
        Ok(Self { h })
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let n = self.h.nrows();
        // row-major copy of I + w·H, keeping only the Hessenberg band
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                let mut v = w * self.h[(i, j)];
                if i == j {
                    v += 1.0;
                }
                m[i * n + j] = v;
            }
        }
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            // only rows k and k+1 carry a nonzero in column k
            if k + 1 < n && m[(k + 1) * n + k].norm() > m[k * n + k].norm() {
                for c in k..n {
                    m.swap(k * n + c, (k + 1) * n + c);
                }
                det = -det;
            }
            let d = m[k * n + k];
            if d == Complex64::new(0.0, 0.0) {
                return d;
            }
            det *= d;
            if k + 1 < n {
                let f = m[(k + 1) * n + k] / d;
                if f != Complex64::new(0.0, 0.0) {
                    for c in k + 1..n {
                        let t = m[k * n + c];
                        m[(k + 1) * n + c] -= f * t;
                    }
                }
            }
        }
        det
    }
}
