//! Broadband mode decomposition of the marginal spectral correlation
//! matrices and effective (Schmidt-like) mode numbers.
//!
//! Diagonalizing the Hermitian one-band correlation block
//! `D_X = V Λ V†` yields the natural broadband modes of band X (columns of
//! `V`) with mean occupations Λ. The participation ratio
//! `μ = (Σλ)² / Σλ²` counts how many of them are effectively occupied; for
//! a single-mode state μ = 1, for k equally occupied modes μ = k.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::state::CorrelationState;
use crate::C64;

/// Natural-mode decomposition of a two-band state.
///
/// `v_signal`/`v_idler` hold the mode functions as *columns*, ordered by
/// decreasing occupation; `occupations_*` are the matching eigenvalues of
/// the band's correlation block. `cross_block` is the pair-correlation
/// matrix `⟨â b̂⟩` re-expressed in the natural-mode bases,
/// `V_s^T ⟨âb̂⟩ V_i` — for an ideal two-mode-squeezed structure it is
/// diagonal.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub v_signal: Array2<C64>,
    pub v_idler: Array2<C64>,
    pub occupations_signal: Vec<f64>,
    pub occupations_idler: Vec<f64>,
    pub cross_block: Array2<C64>,
}

/// Fix the arbitrary global phase of each eigenvector column: rotate so the
/// largest-magnitude component (lowest index on ties) is real and positive.
/// Makes the decomposition deterministic across backends and runs.
fn fix_column_phases(v: &mut Array2<C64>) {
    let (n, m) = v.dim();
    for j in 0..m {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for i in 0..n {
            let mag = v[[i, j]].norm();
            if mag > best_mag + 1e-300 && (mag - best_mag) > 1e-12 * best_mag.max(1.0) {
                best = i;
                best_mag = mag;
            }
        }
        if best_mag > 0.0 {
            let phase = v[[best, j]] / best_mag;
            let rot = phase.conj();
            for i in 0..n {
                v[[i, j]] *= rot;
            }
        }
    }
}

/// Diagonalize both band correlation blocks and express the pair
/// correlations in the resulting natural-mode bases.
pub fn mode_decomposition(state: &CorrelationState) -> Result<ModeDecomposition> {
    let da = state.d_signal().to_owned();
    let db = state.d_idler().to_owned();
    let (ev_a, mut va) = linalg::eigh_descending(&da)?;
    let (ev_b, mut vb) = linalg::eigh_descending(&db)?;
    fix_column_phases(&mut va);
    fix_column_phases(&mut vb);
    // cross = V_s^T · (C_ab · V_i), using a transposed view of V_s
    let cab = state.c_pair().to_owned();
    let tmp = linalg::mat_mul(&cab, &vb);
    let n = tmp.nrows();
    let mut cross = Array2::<C64>::zeros((n, n));
    linalg::mm_into(
        &mut cross,
        faer::Accum::Replace,
        linalg::fref(&va).transpose(),
        faer::Conj::No,
        linalg::fref(&tmp),
        faer::Conj::No,
        C64::new(1.0, 0.0),
    );
    Ok(ModeDecomposition {
        v_signal: va,
        v_idler: vb,
        occupations_signal: ev_a,
        occupations_idler: ev_b,
        cross_block: cross,
    })
}

/// Participation ratio `(Σλ)²/Σλ²` of a nonnegative occupation spectrum.
/// Tiny negative eigenvalues (roundoff from the Hermitian solver) are
/// clamped to zero; an all-zero spectrum has no well-defined mode count.
pub fn mode_number(occupations: &[f64]) -> Result<f64> {
    let mut s1 = 0.0f64;
    let mut s2 = 0.0f64;
    for &l in occupations {
        let l = l.max(0.0);
        s1 += l;
        s2 += l * l;
    }
    if s2 <= 0.0 {
        return Err(Error::InvalidInput(
            "mode number of an unoccupied spectrum is undefined".into(),
        ));
    }
    Ok(s1 * s1 / s2)
}

/// Joint mode number over both bands: participation ratio of the
/// concatenated occupation spectra. Equals the minimum photon-number-
/// weighted mode count over *all* joint unitary recombinations of the
/// 2N modes, so it lower-bounds any basis-dependent count.
pub fn mode_number_joint(occ_signal: &[f64], occ_idler: &[f64]) -> Result<f64> {
    let all: Vec<f64> = occ_signal.iter().chain(occ_idler.iter()).cloned().collect();
    mode_number(&all)
}

/// Mean photon number per natural mode, normalized to unit total:
/// the distribution whose participation ratio is the mode number.
pub fn occupation_distribution(occupations: &[f64]) -> Result<Array1<f64>> {
    let total: f64 = occupations.iter().map(|&l| l.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "occupation distribution of an unoccupied spectrum is undefined".into(),
        ));
    }
    Ok(Array1::from_iter(
        occupations.iter().map(|&l| l.max(0.0) / total),
    ))
}
