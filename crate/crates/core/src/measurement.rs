//! Observables of the propagated two-band state: marginal spectra, temporal
//! intensity profiles, the joint spectral intensity, threshold-detector
//! click probabilities, Hong–Ou–Mandel interference scans, and normalized
//! second-order correlations g².
//!
//! Click probabilities come from vacuum fidelities of reduced Gaussian
//! states. For a threshold detector covering a set of modes with covariance
//! σ, the no-click probability is the vacuum fidelity `F(σ)`; coincidence
//! probabilities follow by inclusion–exclusion. All fidelities are
//! evaluated through offset-tracking factorizations so that coincidence
//! probabilities of order 1e−9 keep ~1e−9 *relative* accuracy — the working
//! point of the source sits at total photon numbers of 1e−4, where naive
//! determinant evaluation would round the entire signal away.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::covariance::CovarianceMatrix;
use crate::error::{Error, Result};
use crate::setup::{FrequencyGrid, PumpPulse, WaveguideSpec};
use crate::state::CorrelationState;
use crate::C64;

/// Which of the two frequency bands an observable refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Signal,
    Idler,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Signal => "signal",
            Band::Idler => "idler",
        }
    }
}

/// Mean photon number per discrete frequency mode of one band (the diagonal
/// of that band's population block).
pub fn spectrum(state: &CorrelationState, band: Band) -> Array1<f64> {
    let d = match band {
        Band::Signal => state.d_signal(),
        Band::Idler => state.d_idler(),
    };
    Array1::from_iter((0..d.nrows()).map(|m| d[[m, m]].re))
}

// ---------------------------------------------------------------------------
// Temporal profiles
// ---------------------------------------------------------------------------

/// Temporal intensity envelopes at the waveguide output. `signal` and
/// `idler` are unnormalized mode-flux intensities (arbitrary common scale);
/// `pump` is the transmitted pump envelope with unit peak. Time zero is the
/// arrival of the pump-pulse center.
#[derive(Debug, Clone)]
pub struct TemporalProfile {
    pub times: Array1<f64>,
    pub signal: Array1<f64>,
    pub idler: Array1<f64>,
    pub pump: Array1<f64>,
}

/// Evaluate `I_X(t) = u†·D_X·u` with mode amplitudes
/// `u_m = √(ω_m/n_X(ω_m))·e^{−iω_m t}`: the flux of band X at the output
/// facet as a function of the retarded time.
///
/// Because the state lives on a discrete frequency comb of spacing `Δω`,
/// `I(t)` is periodic with period `2π/Δω` (the grid's quantization time);
/// choose `times` inside one period to avoid wrap-around copies of the
/// wavepacket.
pub fn temporal_intensity(
    state: &CorrelationState,
    wg: &WaveguideSpec,
    pulse: &PumpPulse,
    times: &[f64],
) -> Result<TemporalProfile> {
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "temporal profile needs at least one sample time".into(),
        ));
    }
    let grid = state.grid();
    let n = grid.n_points();
    let mut xi_s = Array1::<f64>::zeros(n);
    let mut xi_i = Array1::<f64>::zeros(n);
    for m in 0..n {
        let w = grid.omega(m);
        xi_s[m] = (w / wg.signal.refractive_index(w)?).sqrt();
        xi_i[m] = (w / wg.idler.refractive_index(w)?).sqrt();
    }
    let eval = |d: ArrayView2<'_, C64>, xi: &Array1<f64>, t: f64| -> f64 {
        // u†·D·u, with the √(ω/n) weights folded into u
        let u = Array1::from_iter((0..n).map(|m| {
            C64::from_polar(xi[m], -grid.omega(m) * t)
        }));
        let mut total = C64::new(0.0, 0.0);
        for a in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for b in 0..n {
                row += d[[a, b]] * u[b];
            }
            total += u[a].conj() * row;
        }
        total.re
    };
    let mut signal = Array1::<f64>::zeros(times.len());
    let mut idler = Array1::<f64>::zeros(times.len());
    let mut pump = Array1::<f64>::zeros(times.len());
    let ds = state.d_signal();
    let di = state.d_idler();
    for (k, &t) in times.iter().enumerate() {
        signal[k] = eval(ds, &xi_s, t);
        idler[k] = eval(di, &xi_i, t);
        pump[k] = pulse.temporal_intensity(t);
    }
    Ok(TemporalProfile {
        times: Array1::from_iter(times.iter().cloned()),
        signal,
        idler,
        pump,
    })
}

// ---------------------------------------------------------------------------
// Joint spectral intensity
// ---------------------------------------------------------------------------

/// Joint spectral intensity: the coincidence rate between signal mode `n`
/// and idler mode `m`,
/// `JSI_nm = ⟨â†_n â_n b̂†_m b̂_m⟩ = |C_ab,nm|² + D_a,nn·D_b,mm + |D_ab,nm|²`
/// (Wick's theorem for zero-mean Gaussian states).
pub fn jsi(state: &CorrelationState) -> Array2<f64> {
    let da = state.d_signal();
    let db = state.d_idler();
    let dx = state.d_cross();
    let cab = state.c_pair();
    let n = da.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            out[[a, b]] = cab[[a, b]].norm_sqr()
                + da[[a, a]].re * db[[b, b]].re
                + dx[[a, b]].norm_sqr();
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Threshold detectors
// ---------------------------------------------------------------------------

/// Threshold ("click") detector outcomes for one detector per band.
#[derive(Debug, Clone, Copy)]
pub struct ClickProbabilities {
    /// P(click on the first-band detector).
    pub p_signal: f64,
    /// P(click on the second-band detector).
    pub p_idler: f64,
    /// P(both detectors click).
    pub p_coincidence: f64,
}

/// −log of the no-click probability of the subsystem made of the given
/// moment blocks.
fn deficit_of_blocks(d: &ArrayView2<'_, C64>, c: &ArrayView2<'_, C64>) -> Result<f64> {
    CovarianceMatrix::from_moment_blocks(d, c).log_vacuum_deficit()
}

/// Click and coincidence probabilities with one threshold detector on each
/// band of the state (after whatever linear optics have been applied).
/// Inclusion–exclusion on vacuum fidelities:
/// `P_ab = P_a + P_b − P(any click)`, all evaluated cancellation-safely.
pub fn click_probabilities(state: &CorrelationState) -> Result<ClickProbabilities> {
    let s_a = deficit_of_blocks(&state.d_signal(), &state.c_signal())?;
    let s_b = deficit_of_blocks(&state.d_idler(), &state.c_idler())?;
    let s_ab = deficit_of_blocks(&state.d_matrix().view(), &state.c_matrix().view())?;
    let p_a = -(-s_a).exp_m1();
    let p_b = -(-s_b).exp_m1();
    let p_any = -(-s_ab).exp_m1();
    Ok(ClickProbabilities {
        p_signal: p_a,
        p_idler: p_b,
        p_coincidence: p_a + p_b - p_any,
    })
}

// ---------------------------------------------------------------------------
// Hong–Ou–Mandel interference
// ---------------------------------------------------------------------------

/// Linear optics of a HOM interferometer: delay the idler by `tau`, then
/// mix the bands on a balanced beamsplitter. Acting on the stacked mode
/// vector `(â, b̂)`:
///
/// ```text
/// U = (1/√2)·[[1,  V], [1, −V]],     V = diag(e^{iω_m τ})
/// ```
pub fn hom_unitary(grid: &FrequencyGrid, tau: f64) -> Array2<C64> {
    let n = grid.n_points();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut u = Array2::<C64>::zeros((2 * n, 2 * n));
    for m in 0..n {
        let v = C64::from_polar(s, grid.omega(m) * tau);
        u[[m, m]] = C64::new(s, 0.0);
        u[[m, n + m]] = v;
        u[[n + m, m]] = C64::new(s, 0.0);
        u[[n + m, n + m]] = -v;
    }
    u
}

/// Result of a HOM delay scan.
#[derive(Debug, Clone)]
pub struct HomScan {
    pub delays: Array1<f64>,
    /// Coincidence probability between the two beamsplitter outputs at each
    /// delay.
    pub coincidences: Array1<f64>,
    /// Single-detector click probability of the first output arm.
    pub singles_c: Array1<f64>,
    /// Single-detector click probability of the second output arm.
    pub singles_d: Array1<f64>,
    /// Large-|τ| coincidence baseline (mean over the outermost 10% of
    /// samples).
    pub baseline: f64,
    /// Minimum of the scan.
    pub dip_minimum: f64,
    /// `(baseline − minimum)/baseline`.
    pub visibility: f64,
    /// Full width at half depth of the dip, if both half crossings lie
    /// inside the scanned window.
    pub dip_fwhm: Option<f64>,
}

/// Click probabilities `(P_c, P_d, P_cd)` after the HOM optics at a single
/// delay, without materializing the `2N×2N` unitary: the beamsplitter
/// output blocks are written in closed form (`v_m = e^{iω_m τ}`,
/// `ĉ = (â + V·b̂)/√2`, `d̂ = (â − V·b̂)/√2`), then inclusion–exclusion
/// runs on the joint covariance.
fn hom_clicks_at(
    da: &ArrayView2<'_, C64>,
    db: &ArrayView2<'_, C64>,
    cab: &ArrayView2<'_, C64>,
    omegas: &Array1<f64>,
    tau: f64,
) -> Result<(f64, f64, f64)> {
    let n = da.nrows();
    let v = Array1::from_iter((0..n).map(|m| C64::from_polar(1.0, omegas[m] * tau)));
    // F = ½(D_a + V*·D_b·V)      (populations of either output arm)
    // G = ½(D_a − V*·D_b·V)      (⟨ĉ†d̂⟩ cross-populations)
    // E = ½(C_ab·V + V·C_abᵀ)    (⟨ĉĉ⟩ pair block; ⟨d̂d̂⟩ = −E)
    // H = ½(V·C_abᵀ − C_ab·V)    (⟨ĉd̂⟩ pair block)
    let mut dj = Array2::<C64>::zeros((2 * n, 2 * n));
    let mut cj = Array2::<C64>::zeros((2 * n, 2 * n));
    for a in 0..n {
        for b in 0..n {
            let vb_pop = v[a].conj() * db[[a, b]] * v[b];
            let f = 0.5 * (da[[a, b]] + vb_pop);
            let g = 0.5 * (da[[a, b]] - vb_pop);
            let cv = cab[[a, b]] * v[b];
            let vc = v[a] * cab[[b, a]];
            let e = 0.5 * (cv + vc);
            let h = 0.5 * (vc - cv);
            dj[[a, b]] = f;
            dj[[n + a, n + b]] = f;
            dj[[a, n + b]] = g;
            // ⟨d̂†ĉ⟩ block is the adjoint of the ⟨ĉ†d̂⟩ block
            dj[[n + b, a]] = g.conj();
            cj[[a, b]] = e;
            cj[[n + a, n + b]] = -e;
            cj[[a, n + b]] = h;
            cj[[n + b, a]] = h;
        }
    }
    let s_c = deficit_of_blocks(&dj.slice(ndarray::s![..n, ..n]), &cj.slice(ndarray::s![..n, ..n]))?;
    let s_d = deficit_of_blocks(
        &dj.slice(ndarray::s![n.., n..]),
        &cj.slice(ndarray::s![n.., n..]),
    )?;
    let s_joint = deficit_of_blocks(&dj.view(), &cj.view())?;
    let p_c = -(-s_c).exp_m1();
    let p_d = -(-s_d).exp_m1();
    let p_any = -(-s_joint).exp_m1();
    Ok((p_c, p_d, p_c + p_d - p_any))
}

/// Scan the HOM coincidence probability over idler delays and extract the
/// dip parameters.
///
/// The plateau estimate averages the outermost 10 % of the delay samples,
/// so the window should extend well past the dip on both sides. Like every
/// time-domain quantity on a discrete frequency comb, the coincidence curve
/// is periodic in τ with period `2π/Δω`; keep the window inside one period.
/// When the signal and idler leave the device with different group delays
/// (temporal walk-off), the dip is centred on the *compensating* delay, not
/// on τ = 0.
pub fn hom_scan(state: &CorrelationState, delays: &[f64]) -> Result<HomScan> {
    if delays.len() < 3 {
        return Err(Error::InvalidInput(
            "a HOM scan needs at least 3 delay samples".into(),
        ));
    }
    if state.type_ii_leakage() > 1e-10 {
        return Err(Error::InvalidInput(
            "HOM scan expects an untransformed two-band state".into(),
        ));
    }
    let grid = state.grid();
    let omegas = Array1::from_iter((0..grid.n_points()).map(|m| grid.omega(m)));
    let da = state.d_signal();
    let db = state.d_idler();
    let cab = state.c_pair();
    let clicks: Vec<(f64, f64, f64)> = delays
        .par_iter()
        .map(|&tau| hom_clicks_at(&da, &db, &cab, &omegas, tau))
        .collect::<Result<Vec<_>>>()?;
    let singles_c: Vec<f64> = clicks.iter().map(|c| c.0).collect();
    let singles_d: Vec<f64> = clicks.iter().map(|c| c.1).collect();
    let coincidences: Vec<f64> = clicks.iter().map(|c| c.2).collect();

    // baseline from the outermost 10% of delays (≥ 2 samples)
    let mut order: Vec<usize> = (0..delays.len()).collect();
    order.sort_by(|&a, &b| delays[a].abs().partial_cmp(&delays[b].abs()).unwrap());
    let n_base = (delays.len() / 10).max(2);
    let baseline = order
        .iter()
        .rev()
        .take(n_base)
        .map(|&i| coincidences[i])
        .sum::<f64>()
        / n_base as f64;
    if !(baseline > 0.0) {
        return Err(Error::Numerics(
            "HOM baseline coincidence probability is not positive".into(),
        ));
    }
    let (min_idx, dip_minimum) = coincidences
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let visibility = (baseline - dip_minimum) / baseline;

    // width of the dip at half depth, linearly interpolated
    let half = 0.5 * (baseline + dip_minimum);
    let crossing = |from: usize, to_edge: isize| -> Option<f64> {
        let step: isize = if to_edge < 0 { -1 } else { 1 };
        let mut i = from as isize;
        while i + step >= 0 && ((i + step) as usize) < coincidences.len() {
            let j = (i + step) as usize;
            let (ci, cjv) = (coincidences[i as usize], coincidences[j]);
            if (ci - half) * (cjv - half) <= 0.0 && ci != cjv {
                let f = (half - ci) / (cjv - ci);
                return Some(delays[i as usize] + f * (delays[j] - delays[i as usize]));
            }
            i += step;
        }
        None
    };
    let dip_fwhm = match (crossing(min_idx, -1), crossing(min_idx, 1)) {
        (Some(a), Some(b)) => Some((b - a).abs()),
        _ => None,
    };

    Ok(HomScan {
        delays: Array1::from_iter(delays.iter().cloned()),
        coincidences: Array1::from_iter(coincidences),
        singles_c: Array1::from_iter(singles_c),
        singles_d: Array1::from_iter(singles_d),
        baseline,
        dip_minimum,
        visibility,
        dip_fwhm,
    })
}

// ---------------------------------------------------------------------------
// Second-order correlations
// ---------------------------------------------------------------------------

/// Normalized zero-delay pulse-integrated second-order correlation of one
/// band, simulated with threshold detectors: the band is split 50:50 onto
/// two detectors, and `g² = P_ab/(P_a·P_b)` in the low-flux limit of the
/// click rates. Because the splitter is balanced, each arm carries the
/// half-amplitude state and the both-empty probability equals the vacuum
/// fidelity of the unsplit band.
pub fn g2_click(state: &CorrelationState, band: Band) -> Result<f64> {
    let (d, c) = match band {
        Band::Signal => (state.d_signal(), state.c_signal()),
        Band::Idler => (state.d_idler(), state.c_idler()),
    };
    let d_half = d.mapv(|x| 0.5 * x);
    let c_half = c.mapv(|x| 0.5 * x);
    let s_half = deficit_of_blocks(&d_half.view(), &c_half.view())?;
    let s_full = deficit_of_blocks(&d, &c)?;
    let p_arm = -(-s_half).exp_m1();
    let p_any = -(-s_full).exp_m1();
    let p_cd = 2.0 * p_arm - p_any;
    let denom = p_arm * p_arm;
    if denom < 1e-300 {
        return Err(Error::Numerics(format!(
            "{} flux is too low for a click-based g² (per-arm click probability {p_arm:.3e})",
            band.label()
        )));
    }
    Ok(p_cd / denom)
}

/// The same correlation computed from the moment identity
/// `g² = 1 + Tr(D_X²)/(Tr D_X)²` — exact for a band of a zero-mean
/// Gaussian state with no intra-band pair correlations (the waveguide
/// output) in the ideal-photon-counting limit.
pub fn g2_moment(state: &CorrelationState, band: Band) -> Result<f64> {
    let d = match band {
        Band::Signal => state.d_signal(),
        Band::Idler => state.d_idler(),
    };
    let trace: f64 = (0..d.nrows()).map(|m| d[[m, m]].re).sum();
    if trace <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "g² of an unpopulated {} band is undefined",
            band.label()
        )));
    }
    let frob: f64 = d.iter().map(|x| x.norm_sqr()).sum();
    Ok(1.0 + frob / (trace * trace))
}

/// Both estimates of the band correlation; the click-based value contains
/// the detector physics (threshold response at finite flux), the
/// moment-based value is the ideal-counting limit.
#[derive(Debug, Clone, Copy)]
pub struct G2Result {
    pub click: f64,
    pub moment: f64,
}

pub fn g2_both(state: &CorrelationState, band: Band) -> Result<G2Result> {
    Ok(G2Result {
        click: g2_click(state, band)?,
        moment: g2_moment(state, band)?,
    })
}

/// Natural-mode counts `(μ_a, μ_b, μ_ab)` of a propagated state: the
/// participation ratios of each band's occupation spectrum and of the two
/// spectra combined.
pub fn mode_numbers_summary(state: &CorrelationState) -> Result<(f64, f64, f64)> {
    let dec = crate::modes::mode_decomposition(state)?;
    let mu_a = crate::modes::mode_number(&dec.occupations_signal)?;
    let mu_b = crate::modes::mode_number(&dec.occupations_idler)?;
    let mu_ab =
        crate::modes::mode_number_joint(&dec.occupations_signal, &dec.occupations_idler)?;
    Ok((mu_a, mu_b, mu_ab))
}

/// Normalized photon-number imbalance `(N_i − N_s)/(N_s + N_i)`: a
/// loss-asymmetry witness that cancels the overall gain.
pub fn photon_imbalance(state: &CorrelationState) -> Result<f64> {
    let ns = state.photons_signal();
    let ni = state.photons_idler();
    let total = ns + ni;
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "photon imbalance of an unpopulated state is undefined".into(),
        ));
    }
    Ok((ni - ns) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::propagation::{propagate, IntegratorConfig};
    use crate::state::UNITARITY_TOL;
    use crate::test_fixtures::{reference_grid, reference_waveguide};
    use crate::units::{loss_db_per_cm_to_si, thz_to_angular};
    use crate::setup::{qpm_wavevector, DispersionBranch};
    use crate::units::C_LIGHT;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Uncorrelated thermal occupation state (diagonal populations).
    fn thermal_state(na: &[f64], nb: &[f64]) -> CorrelationState {
        let n = na.len();
        let grid = FrequencyGrid::centered(1.5e15, thz_to_angular(2.0), n.max(2))
            .unwrap();
        let grid = if n == 1 {
            FrequencyGrid::single_point(1.5e15, thz_to_angular(2.0)).unwrap()
        } else {
            grid
        };
        let mut da = Array2::<C64>::zeros((n, n));
        let mut db = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            da[[k, k]] = c(na[k], 0.0);
            db[[k, k]] = c(nb[k], 0.0);
        }
        CorrelationState::from_type_ii_blocks(grid, 0.0, da, db, Array2::zeros((n, n)))
            .unwrap()
    }

    /// A physically propagated low-gain state on a reduced grid.
    fn propagated_state(
        n: usize,
        gamma: f64,
        loss_s_db: f64,
        loss_i_db: f64,
    ) -> CorrelationState {
        let (mut wg, pulse) = reference_waveguide();
        wg.gamma = gamma;
        wg.alpha_s = loss_db_per_cm_to_si(loss_s_db).unwrap();
        wg.alpha_i = loss_db_per_cm_to_si(loss_i_db).unwrap();
        let grid = reference_grid(n);
        propagate(
            &wg,
            &pulse,
            &grid,
            &IntegratorConfig { step_count: 256, ..Default::default() },
        )
        .unwrap()
        .state
    }

    #[test]
    fn spectrum_is_the_population_diagonal() {
        let st = thermal_state(&[0.1, 0.3, 0.2], &[0.05, 0.4, 0.15]);
        let sp = spectrum(&st, Band::Signal);
        assert_eq!(sp.len(), 3);
        assert_relative_eq!(sp[1], 0.3, max_relative = 1e-15);
        let si = spectrum(&st, Band::Idler);
        assert_relative_eq!(si[2], 0.15, max_relative = 1e-15);
    }

    #[test]
    fn jsi_matches_wick_oracle_under_band_mixing() {
        // random two-band state pushed through a random passive network so
        // that every moment block is populated
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut da = Array2::<C64>::zeros((n, n));
        let mut db = Array2::<C64>::zeros((n, n));
        let mut cab = Array2::<C64>::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                let r1 = c(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                da[[a, b]] = r1;
                db[[a, b]] = c(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
                cab[[a, b]] = c(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            }
        }
        // Hermitize populations
        let da = &da + &da.t().mapv(|x| x.conj());
        let db = &db + &db.t().mapv(|x| x.conj());
        let grid = reference_grid(n);
        let st = CorrelationState::from_type_ii_blocks(grid.clone(), 0.0, da, db, cab).unwrap();
        let u = hom_unitary(&grid, 0.35e-12);
        assert!(linalg::unitarity_error(&u) < UNITARITY_TOL);
        let mixed = st.apply_unitary(&u).unwrap();
        let j = jsi(&mixed);
        let (dm, cm) = (mixed.d_matrix(), mixed.c_matrix());
        for a in 0..n {
            for b in 0..n {
                // Wick: ⟨a†a b†b⟩ = ⟨a†a⟩⟨b†b⟩ + |⟨ab⟩|² + |⟨a†b⟩|²
                let expect = dm[[a, a]].re * dm[[n + b, n + b]].re
                    + cm[[a, n + b]].norm_sqr()
                    + dm[[a, n + b]].norm_sqr();
                assert_relative_eq!(j[[a, b]], expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn jsi_sum_dominates_uncorrelated_product() {
        let st = propagated_state(12, 30.0, 3.0, 1.0);
        let j = jsi(&st);
        let total: f64 = j.iter().sum();
        let uncorrelated = st.photons_signal() * st.photons_idler();
        assert!(total >= uncorrelated * (1.0 - 1e-12));
        // for a pair source the correlated part dominates at low gain
        assert!(total > 10.0 * uncorrelated);
    }

    #[test]
    fn hom_unitary_is_unitary_and_balanced() {
        let grid = reference_grid(5);
        for tau in [0.0, 0.8e-12, -2.3e-12] {
            let u = hom_unitary(&grid, tau);
            assert!(linalg::unitarity_error(&u) < 1e-12);
        }
        let u = hom_unitary(&grid, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(u[[0, 0]].re, s, max_relative = 1e-15);
        assert_relative_eq!(u[[5, 5]].re, -s, max_relative = 1e-15);
    }

    #[test]
    fn click_probabilities_factorize_for_independent_thermal_bands() {
        let na = [0.02, 0.01, 0.005];
        let nb = [0.03, 0.002, 0.015];
        let st = thermal_state(&na, &nb);
        let p = click_probabilities(&st).unwrap();
        let qa: f64 = na.iter().map(|&x| 1.0 / (1.0 + x)).product();
        let qb: f64 = nb.iter().map(|&x| 1.0 / (1.0 + x)).product();
        assert_relative_eq!(p.p_signal, 1.0 - qa, max_relative = 1e-12);
        assert_relative_eq!(p.p_idler, 1.0 - qb, max_relative = 1e-12);
        // independent detectors: coincidence factorizes exactly
        assert_relative_eq!(
            p.p_coincidence,
            (1.0 - qa) * (1.0 - qb),
            max_relative = 1e-10
        );
    }

    #[test]
    fn click_coincidences_show_pairwise_bunching() {
        // two-mode-squeezed pairs: far stronger coincidences than
        // independent thermals of the same flux
        let n = 2;
        let nbar = [8e-3, 2e-3];
        let grid = reference_grid(n);
        let mut da = Array2::<C64>::zeros((n, n));
        let mut db = Array2::<C64>::zeros((n, n));
        let mut cab = Array2::<C64>::zeros((n, n));
        for k in 0..n {
            da[[k, k]] = c(nbar[k], 0.0);
            db[[k, k]] = c(nbar[k], 0.0);
            cab[[k, k]] = c(0.0, (nbar[k] * (1.0 + nbar[k])).sqrt());
        }
        let st = CorrelationState::from_type_ii_blocks(grid, 0.0, da, db, cab).unwrap();
        let p = click_probabilities(&st).unwrap();
        // marginals are thermal
        let q: f64 = nbar.iter().map(|&x| 1.0 / (1.0 + x)).product();
        assert_relative_eq!(p.p_signal, 1.0 - q, max_relative = 1e-12);
        assert_relative_eq!(p.p_idler, 1.0 - q, max_relative = 1e-12);
        // joint vacuum probability of a TMSV product is Π 1/(1+n̄)
        let p_any_expect = 1.0 - q;
        let p_cd_expect = p.p_signal + p.p_idler - p_any_expect;
        assert_relative_eq!(p.p_coincidence, p_cd_expect, max_relative = 1e-10);
        assert!(p.p_coincidence > 20.0 * p.p_signal * p.p_idler);
    }

    #[test]
    fn g2_click_matches_thermal_product_oracle() {
        for nbar in [1e-5, 1e-3, 0.2] {
            for k in [1usize, 3] {
                let occ = vec![nbar; k];
                let st = thermal_state(&occ, &occ);
                let g2 = g2_click(&st, Band::Signal).unwrap();
                // independent thermal-product oracle; the log1p/expm1 forms
                // keep the oracle itself cancellation-free at tiny n̄
                let s_half: f64 = occ.iter().map(|&x| (0.5 * x).ln_1p()).sum();
                let s_full: f64 = occ.iter().map(|&x| x.ln_1p()).sum();
                let p_arm = -(-s_half).exp_m1();
                let p_cd = 2.0 * p_arm - (-(-s_full).exp_m1());
                assert_relative_eq!(g2, p_cd / (p_arm * p_arm), max_relative = 1e-9);
                // low-flux limit: 1 + 1/k
                if nbar <= 1e-5 {
                    let limit = 1.0 + 1.0 / k as f64;
                    assert!((g2 - limit).abs() < 10.0 * nbar * k as f64 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn g2_click_approaches_moment_value_at_low_gain() {
        let occ_hi: Vec<f64> = vec![4e-2, 2e-2, 1e-2];
        let occ_lo: Vec<f64> = occ_hi.iter().map(|x| x * 1e-3).collect();
        let hi = thermal_state(&occ_hi, &occ_hi);
        let lo = thermal_state(&occ_lo, &occ_lo);
        let gap_hi =
            (g2_click(&hi, Band::Signal).unwrap() - g2_moment(&hi, Band::Signal).unwrap()).abs();
        let gap_lo =
            (g2_click(&lo, Band::Signal).unwrap() - g2_moment(&lo, Band::Signal).unwrap()).abs();
        // the threshold-detector correction is ∝ total flux
        assert!(gap_lo < gap_hi * 2e-2, "gap_hi={gap_hi:.3e} gap_lo={gap_lo:.3e}");
        // moment value is the participation identity
        let mu = crate::modes::mode_number(&occ_hi).unwrap();
        assert_relative_eq!(
            g2_moment(&hi, Band::Signal).unwrap(),
            1.0 + 1.0 / mu,
            max_relative = 1e-12
        );
    }

    #[test]
    fn g2_rejects_empty_band_and_vacuum() {
        let grid = reference_grid(2);
        let st = CorrelationState::from_vacuum(grid);
        assert!(g2_moment(&st, Band::Signal).is_err());
        assert!(g2_click(&st, Band::Idler).is_err());
        assert!(photon_imbalance(&st).is_err());
    }

    #[test]
    fn hom_fast_path_equals_explicit_unitary_path() {
        let st = propagated_state(6, 60.0, 4.0, 1.5);
        let grid = st.grid().clone();
        for tau in [0.0, 0.6e-12, -1.4e-12] {
            let (fast_c, fast_d, fast_cd) = hom_clicks_at(
                &st.d_signal(),
                &st.d_idler(),
                &st.c_pair(),
                &Array1::from_iter((0..6).map(|m| grid.omega(m))),
                tau,
            )
            .unwrap();
            let transformed = st.apply_unitary(&hom_unitary(&grid, tau)).unwrap();
            let p = click_probabilities(&transformed).unwrap();
            assert_relative_eq!(fast_c, p.p_signal, max_relative = 1e-9);
            assert_relative_eq!(fast_d, p.p_idler, max_relative = 1e-9);
            assert_relative_eq!(fast_cd, p.p_coincidence, max_relative = 1e-9);
        }
    }

    /// Control case with all three group velocities equal: the two bands
    /// leave the waveguide with identical (pump-shaped) wavepackets, so the
    /// interference dip sits exactly at zero relative delay and is nearly
    /// perfect at low gain.
    #[test]
    fn hom_dip_sits_at_zero_when_group_velocities_match() {
        let pulse = PumpPulse::new(755e-9, 0.5e-12).unwrap();
        let wp = pulse.omega_p();
        let vg = 0.9 * C_LIGHT / 1.9;
        let pump = DispersionBranch::new(1.9, vg, wp).unwrap();
        let signal = DispersionBranch::new(1.9, vg, 0.5 * wp).unwrap();
        let idler = DispersionBranch::new(1.8, vg, 0.5 * wp).unwrap();
        let k_qpm = qpm_wavevector(&pump, &signal, &idler, wp).unwrap();
        let wg = WaveguideSpec {
            length: 0.01,
            pump,
            signal,
            idler,
            alpha_s: 0.0,
            alpha_i: 0.0,
            k_qpm,
            gamma: 1.0,
        };
        let grid = FrequencyGrid::centered(0.5 * wp, thz_to_angular(4.0), 48).unwrap();
        let st = propagate(
            &wg,
            &pulse,
            &grid,
            &IntegratorConfig { step_count: 256, ..Default::default() },
        )
        .unwrap()
        .state;
        // delay window inside one grid time period (2π/Δω ≈ 5.9 ps here)
        let delays: Vec<f64> = (0..117).map(|k| (k as f64 - 58.0) * 0.05e-12).collect();
        let scan = hom_scan(&st, &delays).unwrap();
        assert!(scan.baseline > 0.0);
        assert!(scan.dip_minimum < scan.baseline);
        assert_relative_eq!(
            scan.visibility,
            (scan.baseline - scan.dip_minimum) / scan.baseline,
            max_relative = 1e-12
        );
        // probabilities are physical: in [0, 1], coincidences below singles
        for k in 0..delays.len() {
            let (pc, pd, pcd) =
                (scan.singles_c[k], scan.singles_d[k], scan.coincidences[k]);
            assert!((0.0..=1.0).contains(&pc) && (0.0..=1.0).contains(&pd));
            assert!(pcd >= -1e-15 && pcd <= pc.min(pd) + 1e-12);
        }
        let min_idx = scan
            .coincidences
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(
            scan.delays[min_idx].abs() < 1.1e-13,
            "dip displaced to {:.2e}",
            scan.delays[min_idx]
        );
        // indistinguishable wavepackets: near-unit visibility at this gain
        assert!(
            scan.visibility > 0.9 && scan.visibility <= 1.0 + 1e-12,
            "visibility {}",
            scan.visibility
        );
        // dip width tracks the single-photon coherence time, which is set
        // by the 8 THz simulation window here
        let w = scan.dip_fwhm.expect("dip should resolve a FWHM");
        assert!(w > 0.05e-12 && w < 0.5e-12, "fwhm {w:.3e}");
        // degenerate scans are rejected
        assert!(hom_scan(&st, &[0.0]).is_err());
    }

    /// With the reference dispersion (signal slower than the co-moving
    /// pump/idler pair), the signal wavepacket is spread over the walk-off
    /// window [0, 3.7 ps]; the dip therefore sits at *positive* delay
    /// (the idler must be retarded onto the signal plateau) and is about
    /// as wide as the walk-off. Loss reshapes the signal packet toward the
    /// pump, so the dip deepens, narrows, and migrates toward zero while
    /// the overall coincidence level drops.
    #[test]
    fn hom_dip_tracks_group_velocity_walkoff_and_loss() {
        let walkoff = 0.01 * (1.9 / (0.95 * 0.9 * C_LIGHT) - 1.9 / (0.9 * C_LIGHT));
        // ±4.5 ps stays inside one grid time period (9.875 ps at 80 bins)
        let delays: Vec<f64> = (0..91).map(|k| (k as f64 - 45.0) * 0.1e-12).collect();
        let mut peaks = Vec::new();
        let mut visibilities = Vec::new();
        let mut widths = Vec::new();
        for alpha_db in [0.0, 5.0, 30.0] {
            let st = propagated_state(80, 10.0, alpha_db, alpha_db);
            let scan = hom_scan(&st, &delays).unwrap();
            let min_idx = scan
                .coincidences
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let tau_min = scan.delays[min_idx];
            assert!(
                tau_min > 0.05e-12 && tau_min < walkoff,
                "alpha={alpha_db}: dip at {tau_min:.2e}"
            );
            // zero delay sits on the dip edge, already below the plateau
            assert!(scan.coincidences[45] < 0.999 * scan.baseline);
            peaks.push(scan.coincidences.iter().cloned().fold(f64::MIN, f64::max));
            visibilities.push(scan.visibility);
            widths.push(scan.dip_fwhm.expect("walk-off dip should have a FWHM"));
        }
        // the lossless dip spans roughly the walk-off window
        assert!(visibilities[0] > 0.15 && visibilities[0] < 0.45);
        assert!(widths[0] > 0.4 * walkoff && widths[0] < 1.3 * walkoff);
        // loss trends: coincidence level falls, visibility rises, dip narrows
        assert!(peaks[0] > peaks[1] && peaks[1] > peaks[2], "peaks {peaks:?}");
        assert!(
            visibilities[0] < visibilities[1] && visibilities[1] < visibilities[2],
            "visibilities {visibilities:?}"
        );
        assert!(widths[0] > widths[1] && widths[1] > widths[2], "widths {widths:?}");
    }

    #[test]
    fn photon_imbalance_tracks_loss_asymmetry() {
        let lossy_idler = propagated_state(4, 30.0, 1.0, 8.0);
        assert!(photon_imbalance(&lossy_idler).unwrap() < -0.05);
        let lossy_signal = propagated_state(4, 30.0, 8.0, 1.0);
        assert!(photon_imbalance(&lossy_signal).unwrap() > 0.05);
        let balanced = propagated_state(4, 30.0, 3.0, 3.0);
        assert!(photon_imbalance(&balanced).unwrap().abs() < 1e-10);
    }

    #[test]
    fn temporal_profile_shows_group_velocity_walkoff() {
        // low gain: pairs are generated uniformly along the device
        let (mut wg, pulse) = reference_waveguide();
        wg.gamma = 10.0;
        let grid = reference_grid(48);
        let res = propagate(
            &wg,
            &pulse,
            &grid,
            &IntegratorConfig { step_count: 256, ..Default::default() },
        )
        .unwrap();
        // the discrete frequency comb makes I(t) periodic with period
        // 2π/Δω ≈ 5.87 ps; sample a window inside one period that covers
        // the expected support [0, +3.7 ps] plus the pulse tails
        assert!(grid.quantization_time() > 5.8e-12);
        let times: Vec<f64> = (0..115).map(|k| -1.0e-12 + k as f64 * 0.05e-12).collect();
        let prof = temporal_intensity(&res.state, &wg, &pulse, &times).unwrap();
        // pump envelope: unit peak at t = 0
        let pump_peak = prof
            .pump
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert_relative_eq!(*pump_peak.1, 1.0, max_relative = 1e-12);
        assert!(prof.times[pump_peak.0].abs() < 1e-13);
        // idler co-propagates with the pump: peak near t = 0, and the
        // packet stays as narrow as the pump pulse
        let idler_peak = prof
            .idler
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(prof.times[idler_peak].abs() < 0.2e-12, "idler peak at {:.2e}",
            prof.times[idler_peak]);
        let idler_max = prof.idler[idler_peak];
        let at = |t: f64| -> usize {
            prof.times
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap()
                })
                .unwrap()
                .0
        };
        assert!(prof.idler[at(1.5e-12)] < 1e-2 * idler_max);
        // signal walks off: generated along the device, it arrives spread
        // over [0, L·(1/v_gs − 1/v_gp)] ≈ [0, 3.7 ps] with mean delay near
        // half the walk-off
        let walkoff = wg.length
            * (1.0 / wg.signal.group_velocity() - 1.0 / wg.pump.group_velocity());
        assert_relative_eq!(walkoff, 3.706e-12, max_relative = 1e-3);
        let total: f64 = prof.signal.iter().sum();
        let mean_t: f64 = prof
            .times
            .iter()
            .zip(prof.signal.iter())
            .map(|(&t, &i)| t * i)
            .sum::<f64>()
            / total;
        assert!(
            mean_t > 0.25 * walkoff && mean_t < walkoff,
            "signal mean delay {:.3e}",
            mean_t
        );
        let signal_peak = prof
            .signal
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let tp = prof.times[signal_peak];
        let signal_max = prof.signal[signal_peak];
        assert!(tp > -0.3e-12 && tp < walkoff + 0.3e-12, "signal peak at {tp:.2e}");
        // flat plateau across the walk-off window, falling off past its end
        assert!(prof.signal[at(3.0e-12)] > 0.5 * signal_max);
        assert!(prof.signal[at(4.5e-12)] < 0.1 * signal_max);
        // empty time list is rejected
        assert!(temporal_intensity(&res.state, &wg, &pulse, &[]).is_err());
    }
}
