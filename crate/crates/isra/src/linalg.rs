//! Small dense linear algebra: Cholesky factorization for Kriging correlation
//! matrices and a pivoted LU solve for the truss stiffness system.
//!
//! Matrices are stored row-major in flat `Vec<f64>`. Sizes stay in the low
//! hundreds, so simple loop kernels beat the overhead of a full linear
//! algebra dependency and keep the pool-prediction hot path in our control.

/// Lower-triangular Cholesky factor `L` of a symmetric positive-definite
/// matrix `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    /// Row-major lower triangle (full n*n storage, upper part zeroed).
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes a symmetric matrix given row-major. Returns `None` if a
    /// pivot is non-positive (matrix not numerically positive definite).
    pub fn decompose(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n, "matrix size mismatch");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major factor storage (lower triangle; upper part zero).
    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// Solves `L v = b` (forward substitution).
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        self.forward_in_place(&mut v);
        v
    }

    /// Forward substitution on a buffer holding `b`, overwritten with `v`.
    pub fn forward_in_place(&self, v: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let mut s = v[i];
            for (k, &lik) in row.iter().enumerate() {
                s -= lik * v[k];
            }
            v[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ w = v` (back substitution).
    pub fn backward_in_place(&self, v: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = v[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * v[k];
            }
            v[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b` through the factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        self.forward_in_place(&mut v);
        self.backward_in_place(&mut v);
        v
    }

    /// `ln det A = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        let n = self.n;
        (0..n).map(|i| self.l[i * n + i].ln()).sum::<f64>() * 2.0
    }

    /// Reconstructs `A = L Lᵀ` (test support).
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.l[i * n + k] * self.l[j * n + k];
                }
                a[i * n + j] = s;
            }
        }
        a
    }
}

/// Solves `A x = b` by LU decomposition with partial pivoting. `a` and `b`
/// are consumed as scratch. Returns `None` when the matrix is singular to
/// working precision.
pub fn lu_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut piv_abs = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > piv_abs {
                piv = r;
                piv_abs = v;
            }
        }
        if piv_abs < 1e-300 || !piv_abs.is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    Some(x)
}
