//! The Gaussian-state representation: second-order correlation matrices and
//! their transformations under linear optics.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::setup::FrequencyGrid;
use crate::C64;

/// Maximum tolerated deviation of `u†u` from the identity in
/// [`CorrelationState::apply_unitary`].
pub const UNITARITY_TOL: f64 = 1e-10;

/// Second-order correlation matrices of a zero-mean Gaussian state over
/// `2N` modes: the first `N` indices are the signal band, the last `N` the
/// idler band.
///
/// * `d` — Hermitian positive-semidefinite matrix of `⟨ĉ†_m ĉ_n⟩` moments,
/// * `c` — complex-symmetric matrix of `⟨ĉ_m ĉ_n⟩` moments,
///
/// stored densely at a waveguide position `z`. States evolved from the
/// vacuum by the type-II master equation keep `⟨â†b̂⟩`, `⟨ââ⟩`, `⟨b̂b̂⟩`
/// zero; the accessors expose the block structure.
#[derive(Debug, Clone)]
pub struct CorrelationState {
    d: Array2<C64>,
    c: Array2<C64>,
    z: f64,
    grid: FrequencyGrid,
}

impl CorrelationState {
    /// Vacuum state (all moments zero) at z = 0.
    pub fn from_vacuum(grid: FrequencyGrid) -> Self {
        let n2 = 2 * grid.n_points();
        Self { d: Array2::zeros((n2, n2)), c: Array2::zeros((n2, n2)), z: 0.0, grid }
    }

    /// Assemble a type-II state from its nonzero blocks: the band-diagonal
    /// `⟨â†â⟩`, `⟨b̂†b̂⟩` moments and the pair-correlation block `⟨âb̂⟩`.
    pub fn from_type_ii_blocks(
        grid: FrequencyGrid,
        z: f64,
        d_aa: Array2<C64>,
        d_bb: Array2<C64>,
        c_ab: Array2<C64>,
    ) -> Result<Self> {
        let n = grid.n_points();
        for (name, m) in [("signal ⟨a†a⟩", &d_aa), ("idler ⟨b†b⟩", &d_bb), ("⟨ab⟩", &c_ab)] {
            if m.dim() != (n, n) {
                return Err(Error::InvalidInput(format!(
                    "block {name} has shape {:?}, expected ({n}, {n})",
                    m.dim()
                )));
            }
        }
        let mut d = Array2::<C64>::zeros((2 * n, 2 * n));
        let mut c = Array2::<C64>::zeros((2 * n, 2 * n));
        d.slice_mut(s![..n, ..n]).assign(&d_aa);
        d.slice_mut(s![n.., n..]).assign(&d_bb);
        c.slice_mut(s![..n, n..]).assign(&c_ab);
        c.slice_mut(s![n.., ..n]).assign(&c_ab.t());
        Ok(Self { d, c, z, grid })
    }

    /// Build a state from full matrices (general Gaussian, not necessarily
    /// type-II form). Dimensions must be `2N×2N` for the grid's `N`.
    pub fn from_full_matrices(
        grid: FrequencyGrid,
        z: f64,
        d: Array2<C64>,
        c: Array2<C64>,
    ) -> Result<Self> {
        let n2 = 2 * grid.n_points();
        if d.dim() != (n2, n2) || c.dim() != (n2, n2) {
            return Err(Error::InvalidInput(format!(
                "moment matrices must be {n2}×{n2}, got {:?} and {:?}",
                d.dim(),
                c.dim()
            )));
        }
        Ok(Self { d, c, z, grid })
    }

    /// Number of modes per band.
    pub fn n_per_band(&self) -> usize {
        self.grid.n_points()
    }

    /// Total number of modes (both bands).
    pub fn n_modes(&self) -> usize {
        2 * self.grid.n_points()
    }

    pub fn z_position(&self) -> f64 {
        self.z
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Full `⟨ĉ†ĉ⟩` matrix.
    pub fn d_matrix(&self) -> &Array2<C64> {
        &self.d
    }

    /// Full `⟨ĉĉ⟩` matrix.
    pub fn c_matrix(&self) -> &Array2<C64> {
        &self.c
    }

    /// Signal-band `⟨â†â⟩` block.
    pub fn d_signal(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.d.slice(s![..n, ..n])
    }

    /// Idler-band `⟨b̂†b̂⟩` block.
    pub fn d_idler(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.d.slice(s![n.., n..])
    }

    /// Cross block `⟨â†b̂⟩` (zero for type-II states from vacuum).
    pub fn d_cross(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.d.slice(s![..n, n..])
    }

    /// Pair-correlation block `⟨âb̂⟩`.
    pub fn c_pair(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.c.slice(s![..n, n..])
    }

    /// Signal-band `⟨ââ⟩` block (zero for type-II states from vacuum).
    pub fn c_signal(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.c.slice(s![..n, ..n])
    }

    /// Idler-band `⟨b̂b̂⟩` block (zero for type-II states from vacuum).
    pub fn c_idler(&self) -> ArrayView2<'_, C64> {
        let n = self.n_per_band();
        self.c.slice(s![n.., n..])
    }

    /// Mean signal photon number `N_a = Re tr ⟨â†â⟩`.
    pub fn photons_signal(&self) -> f64 {
        self.d_signal().diag().iter().map(|x| x.re).sum()
    }

    /// Mean idler photon number `N_b = Re tr ⟨b̂†b̂⟩`.
    pub fn photons_idler(&self) -> f64 {
        self.d_idler().diag().iter().map(|x| x.re).sum()
    }

    /// Total mean photon number per pulse.
    pub fn photons_total(&self) -> f64 {
        self.photons_signal() + self.photons_idler()
    }

    /// Maximum absolute deviation of `d` from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n2 = self.n_modes();
        let mut e: f64 = 0.0;
        for i in 0..n2 {
            for j in i..n2 {
                e = e.max((self.d[[i, j]] - self.d[[j, i]].conj()).norm());
            }
        }
        e
    }

    /// Maximum absolute deviation of `c` from complex symmetry.
    pub fn symmetry_error(&self) -> f64 {
        let n2 = self.n_modes();
        let mut e: f64 = 0.0;
        for i in 0..n2 {
            for j in i..n2 {
                e = e.max((self.c[[i, j]] - self.c[[j, i]]).norm());
            }
        }
        e
    }

    /// Largest magnitude found in the blocks that vanish for type-II states
    /// evolved from vacuum (`⟨â†b̂⟩`, `⟨ââ⟩`, `⟨b̂b̂⟩`).
    pub fn type_ii_leakage(&self) -> f64 {
        let mut m: f64 = 0.0;
        for v in self.d_cross().iter().chain(self.c_signal().iter()).chain(self.c_idler().iter()) {
            m = m.max(v.norm());
        }
        m
    }

    /// Transform the state through a linear-optical network described by a
    /// `2N×2N` unitary `u` acting on the mode operators, `ĉ' = u·ĉ`:
    /// `d' = u*·d·uᵀ`, `c' = u·c·uᵀ`. Hermiticity/symmetry are re-imposed on
    /// the result to scrub rounding noise; the trace of `d` is preserved.
    ///
    /// Fails if `u` is not unitary to within [`UNITARITY_TOL`].
    pub fn apply_unitary(&self, u: &Array2<C64>) -> Result<Self> {
        let n2 = self.n_modes();
        if u.dim() != (n2, n2) {
            return Err(Error::InvalidInput(format!(
                "unitary has shape {:?}, state needs ({n2}, {n2})",
                u.dim()
            )));
        }
        let uerr = linalg::unitarity_error(u);
        if uerr > UNITARITY_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not unitary: ‖u†u − 1‖_max = {uerr:.3e}"
            )));
        }
        use faer::{Accum, Conj};
        let one = C64::new(1.0, 0.0);
        let mut tmp = Array2::<C64>::zeros((n2, n2));
        let mut d_new = Array2::<C64>::zeros((n2, n2));
        // d' = u* · d · uᵀ
        linalg::mm_into(
            &mut tmp,
            Accum::Replace,
            linalg::fref(u),
            Conj::Yes,
            linalg::fref(&self.d),
            Conj::No,
            one,
        );
        linalg::mm_into(
            &mut d_new,
            Accum::Replace,
            linalg::fref(&tmp),
            Conj::No,
            linalg::fref(u).transpose(),
            Conj::No,
            one,
        );
        // c' = u · c · uᵀ
        let mut c_new = Array2::<C64>::zeros((n2, n2));
        linalg::mm_into(
            &mut tmp,
            Accum::Replace,
            linalg::fref(u),
            Conj::No,
            linalg::fref(&self.c),
            Conj::No,
            one,
        );
        linalg::mm_into(
            &mut c_new,
            Accum::Replace,
            linalg::fref(&tmp),
            Conj::No,
            linalg::fref(u).transpose(),
            Conj::No,
            one,
        );
        hermitize_in_place(&mut d_new);
        symmetrize_in_place(&mut c_new);
        Ok(Self { d: d_new, c: c_new, z: self.z, grid: self.grid.clone() })
    }

    /// Model frequency-independent *external* (post-waveguide) intensity
    /// transmission `t_signal`, `t_idler` ∈ (0, 1] applied to each band:
    /// moments scale as the geometric means of the transmissions of the
    /// modes they connect.
    pub fn apply_external_transmission(&self, t_signal: f64, t_idler: f64) -> Result<Self> {
        for (name, t) in [("signal", t_signal), ("idler", t_idler)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "external {name} transmission must lie in (0, 1], got {t}"
                )));
            }
        }
        let n = self.n_per_band();
        let amp = |band: usize| if band == 0 { t_signal.sqrt() } else { t_idler.sqrt() };
        let mut d = self.d.clone();
        let mut c = self.c.clone();
        for i in 0..2 * n {
            let ai = amp(i / n);
            for j in 0..2 * n {
                let s = ai * amp(j / n);
                d[[i, j]] *= s;
                c[[i, j]] *= s;
            }
        }
        Ok(Self { d, c, z: self.z, grid: self.grid.clone() })
    }
}

/// `m ← (m + m†)/2`.
pub(crate) fn hermitize_in_place(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]] = C64::new(m[[i, i]].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]].conj());
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

/// `m ← (m + mᵀ)/2`.
pub(crate) fn symmetrize_in_place(m: &mut Array2<C64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
}
