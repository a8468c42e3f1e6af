//! Quadrature covariance matrices (ħ = 2 convention) and vacuum fidelities.
//!
//! For mode operators `ĉ_m` with quadratures `q̂_m = ĉ_m + ĉ†_m`,
//! `p̂_m = −i(ĉ_m − ĉ†_m)` and ordering `x̂ = (q̂_1…q̂_M, p̂_1…p̂_M)`, the
//! covariance matrix of a zero-mean Gaussian state with moment matrices
//! `D = ⟨ĉ†ĉ⟩`, `C = ⟨ĉĉ⟩` has blocks
//!
//! ```text
//! σ_qq = 1 + 2(Re D + Re C)      σ_qp = 2(Im C + Im D)
//! σ_pq = 2(Im C − Im D)          σ_pp = 1 + 2(Re D − Re C)
//! ```
//!
//! The vacuum gives σ = identity. This module stores the *offset*
//! `Δ = σ − 1` instead of σ itself: every detection quantity downstream
//! (log-determinants, click probabilities) is a function of Δ, and keeping
//! the small part explicit preserves full relative accuracy at photon
//! numbers as low as 1e−4, where forming σ first would round the physics
//! away.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::state::CorrelationState;
use crate::C64;

/// Real symmetric quadrature covariance matrix in the ħ = 2 convention,
/// stored as its offset from the vacuum covariance (the identity).
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    /// `Δ = σ − 1`, real symmetric, `2M×2M`.
    delta: Array2<f64>,
    modes: usize,
}

impl CovarianceMatrix {
    /// Covariance of the subsystem given by `selection` (mode indices into
    /// the state's `0..2N` mode range). Selecting a subset performs the
    /// Gaussian partial trace: complementary rows/columns of the moment
    /// matrices are simply discarded.
    pub fn from_correlations(state: &CorrelationState, selection: &[usize]) -> Result<Self> {
        if selection.is_empty() {
            return Err(Error::InvalidInput(
                "covariance of an empty mode selection is undefined".into(),
            ));
        }
        let n2 = state.n_modes();
        if let Some(&bad) = selection.iter().find(|&&i| i >= n2) {
            return Err(Error::InvalidInput(format!(
                "mode index {bad} out of range for a {n2}-mode state"
            )));
        }
        let m = selection.len();
        let mut d = Array2::<C64>::zeros((m, m));
        let mut c = Array2::<C64>::zeros((m, m));
        for (a, &i) in selection.iter().enumerate() {
            for (b, &j) in selection.iter().enumerate() {
                d[[a, b]] = state.d_matrix()[[i, j]];
                c[[a, b]] = state.c_matrix()[[i, j]];
            }
        }
        Ok(Self::from_moment_blocks(&d.view(), &c.view()))
    }

    /// Covariance of an `M`-mode Gaussian state from its moment matrices
    /// (`d` Hermitian, `c` complex-symmetric).
    pub fn from_moment_blocks(d: &ArrayView2<'_, C64>, c: &ArrayView2<'_, C64>) -> Self {
        let m = d.nrows();
        debug_assert_eq!(d.dim(), (m, m));
        debug_assert_eq!(c.dim(), (m, m));
        let mut delta = Array2::<f64>::zeros((2 * m, 2 * m));
        for i in 0..m {
            for j in 0..m {
                let dd = d[[i, j]];
                let cc = c[[i, j]];
                delta[[i, j]] = 2.0 * (dd.re + cc.re);
                delta[[m + i, m + j]] = 2.0 * (dd.re - cc.re);
                delta[[i, m + j]] = 2.0 * (cc.im + dd.im);
                delta[[m + i, j]] = 2.0 * (cc.im - dd.im);
            }
        }
        Self { delta, modes: m }
    }

    /// Number of modes M (σ is `2M×2M`).
    pub fn n_modes(&self) -> usize {
        self.modes
    }

    /// Offset `Δ = σ − 1`.
    pub fn delta(&self) -> &Array2<f64> {
        &self.delta
    }

    /// Materialize σ itself.
    pub fn sigma(&self) -> Array2<f64> {
        &self.delta + &Array2::<f64>::eye(2 * self.modes)
    }

    /// Invert the covariance construction: recover the moment matrices
    /// `(D, C)` of the state. Exact inverse of
    /// [`CovarianceMatrix::from_moment_blocks`].
    pub fn moments(&self) -> (Array2<C64>, Array2<C64>) {
        let m = self.modes;
        let qq = self.delta.slice(s![..m, ..m]);
        let pp = self.delta.slice(s![m.., m..]);
        let qp = self.delta.slice(s![..m, m..]);
        let pq = self.delta.slice(s![m.., ..m]);
        let mut d = Array2::<C64>::zeros((m, m));
        let mut c = Array2::<C64>::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let re_d = 0.25 * (qq[[i, j]] + pp[[i, j]]);
                let re_c = 0.25 * (qq[[i, j]] - pp[[i, j]]);
                let im_c = 0.25 * (qp[[i, j]] + pq[[i, j]]);
                let im_d = 0.25 * (qp[[i, j]] - pq[[i, j]]);
                d[[i, j]] = C64::new(re_d, im_d);
                c[[i, j]] = C64::new(re_c, im_c);
            }
        }
        (d, c)
    }

    /// −log of the vacuum fidelity, `s = −ln F(σ) = ½ log det((σ + 1)/2)`,
    /// computed through the offset-tracking LDLᵀ so that values as small as
    /// 1e−12 keep full relative accuracy. `s ≥ 0` for physical states.
    pub fn log_vacuum_deficit(&self) -> Result<f64> {
        // (σ + 1)/2 = 1 + Δ/2
        let h = self.delta.mapv(|x| 0.5 * x);
        let ldl = linalg::ldl_one_plus(&h)?;
        Ok(0.5 * ldl.log_det())
    }

    /// Vacuum fidelity `F(σ) = 2^M/√det(σ + 1) ∈ (0, 1]`: the probability
    /// that *no* click-detector monitoring these modes fires.
    pub fn vacuum_fidelity(&self) -> Result<f64> {
        Ok((-self.log_vacuum_deficit()?).exp())
    }

    /// Symplectic eigenvalues, sorted descending; all ≥ 1 for physical
    /// states (ħ = 2).
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::symplectic_eigenvalues_from_offset(&self.delta)
    }

    /// Check the uncertainty relation: every symplectic eigenvalue must be
    /// ≥ `1 − tol`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let nu = self.symplectic_eigenvalues()?;
        let min = nu.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 1.0 - tol {
            return Err(Error::Numerics(format!(
                "state violates the uncertainty relation: min symplectic eigenvalue \
                 {min} < 1 − {tol}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setup::FrequencyGrid;
    use crate::units::thz_to_angular;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn thermal_cov(nbars: &[f64]) -> CovarianceMatrix {
        let m = nbars.len();
        let mut d = Array2::<C64>::zeros((m, m));
        for (i, &n) in nbars.iter().enumerate() {
            d[[i, i]] = c(n, 0.0);
        }
        let cz = Array2::<C64>::zeros((m, m));
        CovarianceMatrix::from_moment_blocks(&d.view(), &cz.view())
    }

    #[test]
    fn vacuum_gives_identity() {
        let grid = FrequencyGrid::centered(1.5e15, thz_to_angular(2.0), 3).unwrap();
        let st = CorrelationState::from_vacuum(grid);
        let cov = CovarianceMatrix::from_correlations(&st, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(cov.delta().iter().map(|x| x.abs()).fold(0.0, f64::max), 0.0);
        let sig = cov.sigma();
        assert_eq!(sig[[0, 0]], 1.0);
        assert_relative_eq!(cov.vacuum_fidelity().unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn single_mode_squeezed_covariance_is_diag_exp() {
        // ⟨a†a⟩ = sinh²r, ⟨aa⟩ = sinh r·cosh r (real) → σ = diag(e^{2r}, e^{−2r})
        let r: f64 = 0.6;
        let d = array![[c(r.sinh().powi(2), 0.0)]];
        let cc = array![[c(r.sinh() * r.cosh(), 0.0)]];
        let cov = CovarianceMatrix::from_moment_blocks(&d.view(), &cc.view());
        let sig = cov.sigma();
        assert_relative_eq!(sig[[0, 0]], (2.0 * r).exp(), max_relative = 1e-13);
        assert_relative_eq!(sig[[1, 1]], (-2.0 * r).exp(), max_relative = 1e-13);
        assert_relative_eq!(sig[[0, 1]], 0.0, epsilon = 1e-14);
        // pure state: symplectic eigenvalue 1
        let nu = cov.symplectic_eigenvalues().unwrap();
        assert_relative_eq!(nu[0], 1.0, epsilon = 1e-12);
        cov.check_physical(1e-10).unwrap();
    }

    #[test]
    fn thermal_covariance_and_fidelity() {
        // single mode, σ = (2n̄+1)·1 and F = 1/(n̄+1)
        for &nbar in &[1e-8, 1e-4, 0.5, 3.0] {
            let cov = thermal_cov(&[nbar]);
            let sig = cov.sigma();
            assert_relative_eq!(sig[[0, 0]], 2.0 * nbar + 1.0, max_relative = 1e-14);
            assert_relative_eq!(sig[[1, 1]], 2.0 * nbar + 1.0, max_relative = 1e-14);
            assert_relative_eq!(
                cov.vacuum_fidelity().unwrap(),
                1.0 / (nbar + 1.0),
                max_relative = 1e-13
            );
        }
        // two uncorrelated thermal modes: F factorizes
        let cov = thermal_cov(&[0.4, 1.7]);
        assert_relative_eq!(
            cov.vacuum_fidelity().unwrap(),
            1.0 / (1.4 * 2.7),
            max_relative = 1e-13
        );
        // symplectic eigenvalues are 2n̄+1
        let nu = cov.symplectic_eigenvalues().unwrap();
        assert_relative_eq!(nu[0], 2.0 * 1.7 + 1.0, epsilon = 1e-12);
        assert_relative_eq!(nu[1], 2.0 * 0.4 + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_deficit_keeps_relative_accuracy_at_tiny_gain() {
        // n̄ = 1e−9: s = ln(1+n̄) ≈ n̄ exactly in relative terms.
        let cov = thermal_cov(&[1e-9]);
        let s = cov.log_vacuum_deficit().unwrap();
        assert_relative_eq!(s, (1e-9f64).ln_1p(), max_relative = 1e-12);
    }

    #[test]
    fn moment_reconstruction_is_identity() {
        // A full complex moment set on 2 modes.
        let d = array![
            [c(0.3, 0.0), c(0.05, 0.02)],
            [c(0.05, -0.02), c(0.7, 0.0)]
        ];
        let cc = array![
            [c(0.11, 0.03), c(0.2, -0.1)],
            [c(0.2, -0.1), c(-0.05, 0.21)]
        ];
        let cov = CovarianceMatrix::from_moment_blocks(&d.view(), &cc.view());
        let (d2, c2) = cov.moments();
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[[i, j]] - d2[[i, j]]).norm() < 1e-13);
                assert!((cc[[i, j]] - c2[[i, j]]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn subsystem_selection_traces_out() {
        // Two-band two-mode state; tracing out the idler leaves a thermal
        // signal with the same ⟨a†a⟩.
        let grid = FrequencyGrid::single_point(1.5e15, thz_to_angular(1.0)).unwrap();
        let r: f64 = 0.8;
        let st = CorrelationState::from_type_ii_blocks(
            grid,
            0.0,
            array![[c(r.sinh().powi(2), 0.0)]],
            array![[c(r.sinh().powi(2), 0.0)]],
            array![[c(r.sinh() * r.cosh(), 0.0)]],
        )
        .unwrap();
        let cov_a = CovarianceMatrix::from_correlations(&st, &[0]).unwrap();
        let nbar = r.sinh().powi(2);
        assert_relative_eq!(
            cov_a.vacuum_fidelity().unwrap(),
            1.0 / (nbar + 1.0),
            max_relative = 1e-12
        );
        // the joint state is pure: F_joint = 1/(n̄+1) as well (TMSV identity)
        let cov_ab = CovarianceMatrix::from_correlations(&st, &[0, 1]).unwrap();
        assert_relative_eq!(
            cov_ab.vacuum_fidelity().unwrap(),
            1.0 / (nbar + 1.0),
            max_relative = 1e-12
        );
        cov_ab.check_physical(1e-10).unwrap();
        // empty and out-of-range selections fail
        assert!(CovarianceMatrix::from_correlations(&st, &[]).is_err());
        assert!(CovarianceMatrix::from_correlations(&st, &[7]).is_err());
    }

    #[test]
    fn unphysical_sigma_is_rejected() {
        // σ = diag(0.5, 0.5): below vacuum noise in both quadratures.
        let mut delta = Array2::<f64>::zeros((2, 2));
        delta[[0, 0]] = -0.5;
        delta[[1, 1]] = -0.5;
        let cov = CovarianceMatrix { delta, modes: 1 };
        assert!(cov.check_physical(1e-8).is_err());
    }
}
