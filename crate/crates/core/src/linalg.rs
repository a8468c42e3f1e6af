//! Dense linear-algebra kernels.
//!
//! Matrix data lives in `ndarray` arrays (row-major). Heavy operations —
//! complex matrix products, Hermitian eigendecomposition, SVD — are delegated
//! to the `faer` backend, which is the fastest pure-Rust implementation
//! available for this workload and is fully deterministic. `faer`'s complex
//! scalar is the same type as `num_complex::Complex64`, so views convert
//! without copying.
//!
//! The module also provides a hand-rolled LDLᵀ factorization of matrices of
//! the form `I + H` that tracks the *offsets* `d_j − 1` of the pivots
//! directly. Threshold-detector probabilities need `log det(I + H)` for `H`
//! as small as 1e−4; forming `I + H` and factorizing it naively would lose
//! five significant digits to cancellation, while the offset-tracking
//! recurrence keeps full relative accuracy.

use faer::linalg::matmul::{matmul, matmul_with_conj};
use faer::{Accum, Conj, Par};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::C64;

/// Borrow an `ndarray` complex matrix as a `faer` view (no copy).
pub(crate) fn fref(a: &Array2<C64>) -> faer::MatRef<'_, faer::c64> {
    let (r, c) = a.dim();
    faer::MatRef::from_row_major_slice(
        a.as_slice().expect("matrix must be contiguous row-major"),
        r,
        c,
    )
}

/// Borrow an `ndarray` complex matrix as a mutable `faer` view (no copy).
pub(crate) fn fmut(a: &mut Array2<C64>) -> faer::MatMut<'_, faer::c64> {
    let (r, c) = a.dim();
    faer::MatMut::from_row_major_slice_mut(
        a.as_slice_mut().expect("matrix must be contiguous row-major"),
        r,
        c,
    )
}

/// `dst = α·op(a)·op(b)` (with `Accum::Replace`) or `dst += …` (with
/// `Accum::Add`), where each operand is implicitly conjugated when its
/// `Conj` flag says so. Transposition is composed on the views themselves;
/// combining `.transpose()` with `Conj::Yes` gives an adjoint — nothing is
/// materialized.
pub(crate) fn mm_into(
    dst: &mut Array2<C64>,
    acc: Accum,
    a: faer::MatRef<'_, faer::c64>,
    conj_a: Conj,
    b: faer::MatRef<'_, faer::c64>,
    conj_b: Conj,
    alpha: C64,
) {
    matmul_with_conj(fmut(dst), acc, a, conj_a, b, conj_b, alpha, Par::Seq);
}

/// Plain product `a·b` into a fresh array.
pub fn mat_mul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((a.nrows(), b.ncols()));
    mm_into(
        &mut out,
        Accum::Replace,
        fref(a),
        Conj::No,
        fref(b),
        Conj::No,
        C64::new(1.0, 0.0),
    );
    out
}

/// Maximum absolute deviation of `u†u` from the identity.
pub fn unitarity_error(u: &Array2<C64>) -> f64 {
    let n = u.ncols();
    let mut g = Array2::<C64>::zeros((n, n));
    mm_into(
        &mut g,
        Accum::Replace,
        fref(u).transpose(),
        Conj::Yes,
        fref(u),
        Conj::No,
        C64::new(1.0, 0.0),
    );
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            err = err.max((g[[i, j]] - target).norm());
        }
    }
    err
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, in the
/// same order as the eigenvalues. Eigenvector phases are *not* fixed here;
/// see [`crate::modes`] for the deterministic phase convention.
pub fn eigh_descending(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "eigendecomposition needs a square non-empty matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let m = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| a[[i, j]]);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerics(format!("Hermitian eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut vals = vec![0.0; n];
    let mut vecs = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let src = n - 1 - k; // backend returns ascending order
        vals[k] = s[src].re;
        for i in 0..n {
            vecs[[i, k]] = u[(i, src)];
        }
    }
    Ok((vals, vecs))
}

/// Singular values of a real matrix, descending.
pub fn singular_values(a: &Array2<f64>) -> Result<Vec<f64>> {
    let (r, c) = a.dim();
    if r == 0 || c == 0 {
        return Err(Error::InvalidInput("SVD of an empty matrix".into()));
    }
    let m = faer::Mat::<f64>::from_fn(r, c, |i, j| a[[i, j]]);
    let svd = m
        .svd()
        .map_err(|e| Error::Numerics(format!("SVD failed: {e:?}")))?;
    let s = svd.S().column_vector();
    Ok((0..r.min(c)).map(|i| s[i]).collect())
}

/// Unit-diagonal LDLᵀ factorization of `A = I + H` for symmetric `H`,
/// tracking the pivot offsets `δ_j = d_j − 1` exactly.
///
/// `A = L · diag(1 + δ) · Lᵀ` with `L` unit lower triangular. No pivoting is
/// performed; `A` must be positive definite (always true for `(σ + 1)/2`
/// with a physical covariance matrix σ).
pub(crate) struct UnitLdl {
    /// Strictly-lower factor entries, flat row-major `n×n` (unit diagonal
    /// stored as 1).
    pub l: Vec<f64>,
    /// Pivot offsets `δ_j = d_j − 1`.
    pub delta: Vec<f64>,
    pub n: usize,
}

impl UnitLdl {
    /// `log det(I + H) = Σ log1p(δ_j)`, accurate for tiny `H`.
    pub fn log_det(&self) -> f64 {
        self.delta.iter().map(|&d| d.ln_1p()).sum()
    }

    /// Materialize the Cholesky-like factor `G = L·√d` so that `A = G·Gᵀ`.
    pub fn factor(&self) -> Array2<f64> {
        let n = self.n;
        let mut g = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let sq = (1.0 + self.delta[j]).sqrt();
            for i in j..n {
                g[[i, j]] = self.l[i * n + j] * sq;
            }
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Factor `I + H` (symmetric `H`, lower triangle read) as described on
/// [`UnitLdl`]. Fails if a pivot `1 + δ_j` is not strictly positive.
pub(crate) fn ldl_one_plus(h: &Array2<f64>) -> Result<UnitLdl> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "LDL^T factorization needs a square matrix, got {}×{}",
            n,
            h.ncols()
        )));
    }
    let mut l = vec![0.0f64; n * n];
    let mut delta = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for j in 0..n {
        for k in 0..j {
            w[k] = l[j * n + k] * (1.0 + delta[k]);
        }
        let dj = h[[j, j]] - dot(&l[j * n..j * n + j], &w[..j]);
        if !(1.0 + dj > 0.0) {
            return Err(Error::Numerics(format!(
                "matrix I+H is not positive definite (pivot {} at column {})",
                1.0 + dj,
                j
            )));
        }
        delta[j] = dj;
        let d = 1.0 + dj;
        for i in (j + 1)..n {
            let v = (h[[i, j]] - dot(&l[i * n..i * n + j], &w[..j])) / d;
            l[i * n + j] = v;
        }
        l[j * n + j] = 1.0;
    }
    Ok(UnitLdl { l, delta, n })
}

/// Symplectic eigenvalues of a real symmetric covariance matrix given as its
/// offset `Δ = σ − I`, for the quadrature ordering `(q_1…q_M, p_1…p_M)` and
/// ħ = 2 (vacuum ⇒ all symplectic eigenvalues 1).
///
/// Uses the factorization `σ = G·Gᵀ`; the singular values of `Gᵀ·Ω·G` (Ω the
/// symplectic form) come in equal pairs whose common value is a symplectic
/// eigenvalue. Returned sorted descending, length `M`.
pub fn symplectic_eigenvalues_from_offset(delta: &Array2<f64>) -> Result<Vec<f64>> {
    let n = delta.nrows();
    if n == 0 || n % 2 != 0 || delta.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "covariance matrix must be square with even dimension, got {}×{}",
            n,
            delta.ncols()
        )));
    }
    let m = n / 2;
    let ldl = ldl_one_plus(delta)?;
    let g = ldl.factor();
    // Ω·G for Ω = [[0, I], [−I, 0]]: top rows take G's bottom rows, bottom
    // rows take the negated top rows.
    let mut og = Array2::<f64>::zeros((n, n));
    for i in 0..m {
        for j in 0..n {
            og[[i, j]] = g[[m + i, j]];
            og[[m + i, j]] = -g[[i, j]];
        }
    }
    // B = Gᵀ·(Ω·G), antisymmetric.
    let gm = faer::Mat::<f64>::from_fn(n, n, |i, j| g[[i, j]]);
    let ogm = faer::Mat::<f64>::from_fn(n, n, |i, j| og[[i, j]]);
    let mut b = faer::Mat::<f64>::zeros(n, n);
    matmul(
        b.as_mut(),
        Accum::Replace,
        gm.transpose(),
        ogm.as_ref(),
        1.0,
        Par::Seq,
    );
    let svd = b
        .svd()
        .map_err(|e| Error::Numerics(format!("SVD failed in symplectic spectrum: {e:?}")))?;
    let s = svd.S().column_vector();
    // Singular values are (ν_1, ν_1, ν_2, ν_2, …) descending; take one of
    // each pair.
    Ok((0..m).map(|k| s[2 * k]).collect())
}

/// Elementwise multiply `a ∘ b` in place: `a[i,j] *= b[i,j]`.
pub(crate) fn hadamard_in_place(a: &mut Array2<C64>, b: &Array2<C64>) {
    ndarray::Zip::from(a).and(b).for_each(|x, &y| *x *= y);
}

/// `exp(i·θ)` elementwise over a real matrix.
pub(crate) fn phase_matrix(theta: &Array2<f64>, scale: f64) -> Array2<C64> {
    theta.mapv(|t| C64::from_polar(1.0, t * scale))
}

/// `exp(i·θ)` elementwise over a real vector.
pub(crate) fn phase_vector(theta: &Array1<f64>, scale: f64) -> Array1<C64> {
    theta.mapv(|t| C64::from_polar(1.0, t * scale))
}
