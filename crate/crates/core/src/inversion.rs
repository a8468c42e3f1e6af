//! Estimation of internal waveguide losses from frequency-unresolved
//! correlation measurements.
//!
//! Internal signal/idler intensity losses are parametrized by a mean level
//! ᾱ and an asymmetry r, `α_s = ᾱ(1+r)`, `α_i = ᾱ(1−r)` (dB/cm). The
//! click-based g² of the two bands responds differently to the two loss
//! channels, so a measured pair (g²_s, g²_i) pins (ᾱ, r) down as the
//! intersection of two isolines in the parameter plane. The workflow:
//!
//! 1. [`calibrate_gamma`] fixes the coupling strength Γ so a reference
//!    configuration reproduces a target photon number (N ∝ Γ² at low gain
//!    makes this a quickly converging rescale iteration).
//! 2. [`ForwardModel::forward`] maps (ᾱ, r) to the observables through a
//!    full propagation.
//! 3. [`build_forward_grid`] samples the map over a parameter rectangle
//!    (cells evaluate in parallel) for seeding, reporting, and isoline
//!    export.
//! 4. [`invert_losses`] collects every grid cell compatible with the
//!    measured pair, clusters adjacent cells, polishes one root per
//!    cluster with a damped Newton iteration on the exact forward map,
//!    and demands exactly one distinct root — zero or several are
//!    reported as dedicated errors rather than silently resolved.
//! 5. An optional measured photon-number imbalance
//!    `Rᴺ = (N_i − N_s)/(N_s + N_i)` cross-checks the root: a mismatch
//!    flags an inconsistent physical model rather than failing the fit.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measurement::{g2_click, photon_imbalance, Band};
use crate::propagation::{propagate, IntegratorConfig, PropagationResult};
use crate::setup::{FrequencyGrid, PumpPulse, WaveguideSpec};
use crate::units::loss_db_per_cm_to_si;

/// Mean/asymmetry parametrization of the two internal loss channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    /// Mean internal loss ᾱ (dB/cm), ≥ 0.
    pub alpha_bar: f64,
    /// Asymmetry r ∈ (−1, 1); positive r loads the signal band.
    pub r: f64,
}

impl LossParams {
    pub fn new(alpha_bar: f64, r: f64) -> Result<Self> {
        let p = Self { alpha_bar, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_bar >= 0.0 && self.alpha_bar.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mean loss must be a finite non-negative dB/cm value, got {}",
                self.alpha_bar
            )));
        }
        if !(self.r.abs() < 1.0) {
            return Err(Error::InvalidInput(format!(
                "loss asymmetry must satisfy |r| < 1, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// Signal loss ᾱ(1 + r) in dB/cm.
    pub fn alpha_signal_db(&self) -> f64 {
        self.alpha_bar * (1.0 + self.r)
    }

    /// Idler loss ᾱ(1 − r) in dB/cm.
    pub fn alpha_idler_db(&self) -> f64 {
        self.alpha_bar * (1.0 - self.r)
    }

    /// Both channel losses converted to SI intensity attenuation (1/m).
    pub fn to_si(&self) -> Result<(f64, f64)> {
        self.validate()?;
        Ok((
            loss_db_per_cm_to_si(self.alpha_signal_db())?,
            loss_db_per_cm_to_si(self.alpha_idler_db())?,
        ))
    }
}

/// Observables produced by one forward evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForwardPoint {
    /// Click-based g² of the signal band.
    pub g2_signal: f64,
    /// Click-based g² of the idler band.
    pub g2_idler: f64,
    /// Photon-number imbalance Rᴺ = (N_i − N_s)/(N_s + N_i).
    pub imbalance: f64,
    /// Mean signal photon number at the output facet.
    pub n_signal: f64,
    /// Mean idler photon number at the output facet.
    pub n_idler: f64,
}

/// The physical configuration behind the forward map: a waveguide template
/// whose loss fields are overwritten per evaluation, plus pump, frequency
/// grid, and integrator settings. Γ is carried by the template.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    waveguide: WaveguideSpec,
    pulse: PumpPulse,
    grid: FrequencyGrid,
    integrator: IntegratorConfig,
}

impl ForwardModel {
    pub fn new(
        waveguide: WaveguideSpec,
        pulse: PumpPulse,
        grid: FrequencyGrid,
        integrator: IntegratorConfig,
    ) -> Result<Self> {
        waveguide.validate()?;
        integrator.validate()?;
        Ok(Self { waveguide, pulse, grid, integrator })
    }

    pub fn waveguide(&self) -> &WaveguideSpec {
        &self.waveguide
    }

    pub fn pulse(&self) -> &PumpPulse {
        &self.pulse
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn integrator(&self) -> &IntegratorConfig {
        &self.integrator
    }

    /// Same model with a different coupling strength.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut m = self.clone();
        m.waveguide = m.waveguide.with_gamma(gamma);
        m
    }

    /// One full propagation + measurement pass at the given losses.
    pub fn forward(&self, params: &LossParams) -> Result<ForwardPoint> {
        let (alpha_s, alpha_i) = params.to_si()?;
        let wg = self.waveguide.with_losses(alpha_s, alpha_i);
        let run = propagate(&wg, &self.pulse, &self.grid, &self.integrator)?;
        let state = &run.state;
        Ok(ForwardPoint {
            g2_signal: g2_click(state, Band::Signal)?,
            g2_idler: g2_click(state, Band::Idler)?,
            imbalance: photon_imbalance(state)?,
            n_signal: state.photons_signal(),
            n_idler: state.photons_idler(),
        })
    }

    /// SHA-256 over the canonical SI-unit parameter string: two models hash
    /// equal iff every physically relevant number (waveguide, pump, grid,
    /// integrator, Γ) is bit-identical.
    pub fn content_hash(&self) -> String {
        let wg = &self.waveguide;
        let branch = |b: &crate::setup::DispersionBranch| {
            format!(
                "{:.17e},{:.17e},{:.17e}",
                b.n_ref(),
                b.group_velocity(),
                b.omega_ref()
            )
        };
        let n = self.grid.n_points();
        let canonical = format!(
            "length={:.17e};pump_lambda={:.17e};pump_fwhm={:.17e};\
             pump_branch={};signal_branch={};idler_branch={};\
             k_qpm={:.17e};gamma={:.17e};\
             grid_n={};grid_first={:.17e};grid_last={:.17e};\
             method={};steps={};tol={:.17e}",
            wg.length,
            self.pulse.center_wavelength(),
            self.pulse.fwhm_duration(),
            branch(&wg.pump),
            branch(&wg.signal),
            branch(&wg.idler),
            wg.k_qpm,
            wg.gamma,
            n,
            self.grid.omega(0),
            self.grid.omega(n - 1),
            self.integrator.method_label(),
            self.integrator.step_count,
            self.integrator.tolerance,
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            use std::fmt::Write;
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Metadata block stored with grids built from this model.
    pub fn metadata(&self) -> GridMetadata {
        GridMetadata {
            config_hash: self.content_hash(),
            gamma: self.waveguide.gamma,
            grid_points: self.grid.n_points(),
            step_count: self.integrator.step_count,
        }
    }
}

/// Fix Γ so that the given configuration's total output photon number hits
/// `target` to better than 1e−4 relative.
///
/// Uses the low-gain quadratic law N ∝ Γ²: each round rescales
/// `Γ ← Γ·√(target/N)` and re-propagates; at the photon numbers this crate
/// targets the first rescale already lands within verification tolerance.
/// A zero target short-circuits to Γ = 0. Returns the calibrated Γ together
/// with the verifying propagation.
pub fn calibrate_gamma(
    waveguide: &WaveguideSpec,
    pulse: &PumpPulse,
    grid: &FrequencyGrid,
    integrator: &IntegratorConfig,
    target: f64,
) -> Result<(f64, PropagationResult)> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "calibration target photon number must be finite and ≥ 0, got {target}"
        )));
    }
    if target == 0.0 {
        let run = propagate(&waveguide.with_gamma(0.0), pulse, grid, integrator)?;
        return Ok((0.0, run));
    }
    let mut gamma = if waveguide.gamma > 0.0 { waveguide.gamma } else { 1.0 };
    const MAX_ROUNDS: usize = 8;
    const REL_TOL: f64 = 1e-4;
    for _ in 0..MAX_ROUNDS {
        let run = propagate(&waveguide.with_gamma(gamma), pulse, grid, integrator)?;
        let total = run.state.photons_signal() + run.state.photons_idler();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerics(format!(
                "calibration propagation produced non-positive photon number {total} at gamma={gamma}"
            )));
        }
        if (total / target - 1.0).abs() < REL_TOL {
            return Ok((gamma, run));
        }
        gamma *= (target / total).sqrt();
    }
    Err(Error::Numerics(format!(
        "gamma calibration did not reach target {target:.6e} within {MAX_ROUNDS} rounds \
         (the quadratic photon-number law may not hold at this gain)"
    )))
}

/// Where and why a grid cell failed to evaluate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFailure {
    pub alpha_index: usize,
    pub r_index: usize,
    pub message: String,
}

/// Provenance of a sampled forward map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    /// Content hash of the generating model ([`ForwardModel::content_hash`]).
    pub config_hash: String,
    /// Coupling strength Γ (1/m).
    pub gamma: f64,
    /// Frequency bins per band.
    pub grid_points: usize,
    /// Integrator step count.
    pub step_count: usize,
}

/// The forward map sampled on a rectangle of (ᾱ, r) values; surfaces are
/// indexed `[alpha_index, r_index]`. Failed cells hold NaN and are listed
/// in `failures`. (Persisted through the binary container in the I/O
/// module — NaN markers rule out JSON.)
#[derive(Debug, Clone)]
pub struct ForwardMapGrid {
    pub alpha_axis: Vec<f64>,
    pub r_axis: Vec<f64>,
    pub g2_signal: Array2<f64>,
    pub g2_idler: Array2<f64>,
    pub imbalance: Array2<f64>,
    pub failures: Vec<GridFailure>,
    pub metadata: GridMetadata,
}

fn validate_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::InvalidInput(format!("{name} axis is empty")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    if !axis.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} axis contains non-finite values")));
    }
    Ok(())
}

/// Sample an arbitrary forward function on a parameter rectangle. The
/// cells evaluate in parallel; results are written by index, so the grid
/// is independent of scheduling order.
pub fn build_forward_grid_with<F>(
    forward: F,
    alpha_axis: &[f64],
    r_axis: &[f64],
    metadata: GridMetadata,
) -> Result<ForwardMapGrid>
where
    F: Fn(&LossParams) -> Result<ForwardPoint> + Sync,
{
    validate_axis("alpha_bar", alpha_axis)?;
    validate_axis("r", r_axis)?;
    for &a in alpha_axis {
        if a < 0.0 {
            return Err(Error::InvalidInput(format!("alpha_bar axis value {a} is negative")));
        }
    }
    for &r in r_axis {
        if r.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!("r axis value {r} lies outside (−1, 1)")));
        }
    }
    let (na, nr) = (alpha_axis.len(), r_axis.len());
    let evaluations: Vec<(usize, Result<ForwardPoint>)> = (0..na * nr)
        .into_par_iter()
        .map(|flat| {
            let params = LossParams {
                alpha_bar: alpha_axis[flat / nr],
                r: r_axis[flat % nr],
            };
            (flat, forward(&params))
        })
        .collect();
    let mut g2_signal = Array2::from_elem((na, nr), f64::NAN);
    let mut g2_idler = Array2::from_elem((na, nr), f64::NAN);
    let mut imbalance = Array2::from_elem((na, nr), f64::NAN);
    let mut failures = Vec::new();
    for (flat, outcome) in evaluations {
        let (i, j) = (flat / nr, flat % nr);
        match outcome {
            Ok(point) => {
                g2_signal[[i, j]] = point.g2_signal;
                g2_idler[[i, j]] = point.g2_idler;
                imbalance[[i, j]] = point.imbalance;
            }
            Err(err) => failures.push(GridFailure {
                alpha_index: i,
                r_index: j,
                message: err.to_string(),
            }),
        }
    }
    Ok(ForwardMapGrid {
        alpha_axis: alpha_axis.to_vec(),
        r_axis: r_axis.to_vec(),
        g2_signal,
        g2_idler,
        imbalance,
        failures,
        metadata,
    })
}

/// Sample the physical forward map on a parameter rectangle.
pub fn build_forward_grid(
    model: &ForwardModel,
    alpha_axis: &[f64],
    r_axis: &[f64],
) -> Result<ForwardMapGrid> {
    build_forward_grid_with(
        |p| model.forward(p),
        alpha_axis,
        r_axis,
        model.metadata(),
    )
}

/// Tolerances and iteration limits of the inversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InversionSettings {
    /// Assumed measurement uncertainty of each g² value; grid cells whose
    /// corner range expanded by this amount misses a measured value are
    /// never considered (drives the no-intersection verdict).
    pub g2_tolerance: f64,
    /// Convergence threshold on the max-norm g² residual of the Newton
    /// polish.
    pub newton_tolerance: f64,
    /// Newton iteration cap per candidate cluster.
    pub max_iterations: usize,
    /// Acceptance band for the optional measured Rᴺ cross-check.
    pub r_n_tolerance: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            g2_tolerance: 0.02,
            newton_tolerance: 1e-4,
            max_iterations: 30,
            r_n_tolerance: 0.05,
        }
    }
}

/// Verdict of the optional photon-imbalance cross-check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RnCheck {
    /// No measured Rᴺ was supplied.
    NotChecked,
    /// Measured and predicted imbalance agree within tolerance.
    Consistent { measured: f64, predicted: f64, tolerance: f64 },
    /// The root reproduces the g² pair but not the measured imbalance —
    /// the assumed physical model is suspect.
    Inconsistent { measured: f64, predicted: f64, tolerance: f64 },
}

/// A converged loss estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossEstimate {
    pub params: LossParams,
    /// g² values of the model at the estimate.
    pub g2_signal: f64,
    pub g2_idler: f64,
    /// Signed residuals (model − measured).
    pub residual_signal: f64,
    pub residual_idler: f64,
    /// Predicted photon-number imbalance at the estimate.
    pub r_n_predicted: f64,
    pub n_signal: f64,
    pub n_idler: f64,
    /// Newton iterations spent on the converged root.
    pub iterations: usize,
    pub r_n_check: RnCheck,
}

// Search-domain clamp for the Newton polish: keeps finite-difference
// probes inside the validity range of the loss parametrization.
const ALPHA_MIN: f64 = 1e-3;
const ALPHA_MAX: f64 = 35.0;
const R_LIMIT: f64 = 0.95;

fn clamp_params(alpha_bar: f64, r: f64) -> LossParams {
    LossParams {
        alpha_bar: alpha_bar.clamp(ALPHA_MIN, ALPHA_MAX),
        r: r.clamp(-R_LIMIT, R_LIMIT),
    }
}

/// Minimal union–find over cell indices, for clustering adjacent candidate
/// cells.
struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

struct NewtonOutcome {
    params: LossParams,
    point: ForwardPoint,
    iterations: usize,
}

/// Damped Newton on the 2×2 residual (g²_s − m_s, g²_i − m_i) with a
/// forward-difference Jacobian evaluated on the exact forward map.
fn newton_polish<F>(
    forward: &F,
    seed: LossParams,
    measured: (f64, f64),
    settings: &InversionSettings,
) -> Result<NewtonOutcome>
where
    F: Fn(&LossParams) -> Result<ForwardPoint>,
{
    let mut params = clamp_params(seed.alpha_bar, seed.r);
    let mut point = forward(&params)?;
    for iteration in 0..settings.max_iterations {
        let res = (point.g2_signal - measured.0, point.g2_idler - measured.1);
        if res.0.abs().max(res.1.abs()) < settings.newton_tolerance {
            return Ok(NewtonOutcome { params, point, iterations: iteration });
        }
        let h_alpha = f64::max(1e-3 * params.alpha_bar.abs(), 1e-2);
        let h_r = f64::max(1e-3 * params.r.abs(), 5e-3);
        let probe_a = clamp_params(params.alpha_bar + h_alpha, params.r);
        let probe_r = clamp_params(params.alpha_bar, params.r + h_r);
        let da = probe_a.alpha_bar - params.alpha_bar;
        let dr = probe_r.r - params.r;
        if da == 0.0 || dr == 0.0 {
            return Err(Error::Numerics(
                "loss inversion seed pinned to the parameter boundary".into(),
            ));
        }
        let fa = forward(&probe_a)?;
        let fr = forward(&probe_r)?;
        let j = [
            [(fa.g2_signal - point.g2_signal) / da, (fr.g2_signal - point.g2_signal) / dr],
            [(fa.g2_idler - point.g2_idler) / da, (fr.g2_idler - point.g2_idler) / dr],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = j.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        if !det.is_finite() || det.abs() <= 1e-14 * scale * scale {
            return Err(Error::Numerics(format!(
                "singular forward-map Jacobian near (alpha_bar={:.4}, r={:.4})",
                params.alpha_bar, params.r
            )));
        }
        let step = (
            -(j[1][1] * res.0 - j[0][1] * res.1) / det,
            -(j[0][0] * res.1 - j[1][0] * res.0) / det,
        );
        let norm0 = res.0.hypot(res.1);
        let mut advanced = false;
        for halving in 0..7 {
            let damp = 0.5f64.powi(halving);
            let cand = clamp_params(
                params.alpha_bar + damp * step.0,
                params.r + damp * step.1,
            );
            let Ok(fc) = forward(&cand) else { continue };
            let cand_res =
                (fc.g2_signal - measured.0).hypot(fc.g2_idler - measured.1);
            if cand_res < norm0 {
                params = cand;
                point = fc;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return Err(Error::Numerics(format!(
                "loss-inversion Newton stalled at (alpha_bar={:.4}, r={:.4}), residual {:.3e}",
                params.alpha_bar, params.r, norm0
            )));
        }
    }
    Err(Error::Numerics(format!(
        "loss-inversion Newton did not converge within {} iterations",
        settings.max_iterations
    )))
}

/// Invert a measured g² pair on an arbitrary forward function, using the
/// sampled grid only for candidate seeding and the no-intersection
/// verdict. See [`invert_losses`] for the physical entry point.
pub fn invert_losses_with<F>(
    forward: F,
    map: &ForwardMapGrid,
    g2_signal_measured: f64,
    g2_idler_measured: f64,
    r_n_measured: Option<f64>,
    settings: &InversionSettings,
) -> Result<LossEstimate>
where
    F: Fn(&LossParams) -> Result<ForwardPoint>,
{
    if !(g2_signal_measured.is_finite() && g2_idler_measured.is_finite()) {
        return Err(Error::InvalidInput("measured g² values must be finite".into()));
    }
    let (na, nr) = (map.alpha_axis.len(), map.r_axis.len());
    if na < 2 || nr < 2 {
        return Err(Error::Config(
            "loss inversion needs a forward grid of at least 2×2 samples".into(),
        ));
    }

    // Stage 1: cells whose corner-value range (inflated by the measurement
    // tolerance) covers both measured values.
    let n_cells = (na - 1) * (nr - 1);
    let cell_ok = |i: usize, j: usize| -> bool {
        let mut lo_s = f64::INFINITY;
        let mut hi_s = f64::NEG_INFINITY;
        let mut lo_i = f64::INFINITY;
        let mut hi_i = f64::NEG_INFINITY;
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let s = map.g2_signal[[i + di, j + dj]];
            let t = map.g2_idler[[i + di, j + dj]];
            if !s.is_finite() || !t.is_finite() {
                return false;
            }
            lo_s = lo_s.min(s);
            hi_s = hi_s.max(s);
            lo_i = lo_i.min(t);
            hi_i = hi_i.max(t);
        }
        let tol = settings.g2_tolerance;
        g2_signal_measured >= lo_s - tol
            && g2_signal_measured <= hi_s + tol
            && g2_idler_measured >= lo_i - tol
            && g2_idler_measured <= hi_i + tol
    };
    let candidates: Vec<usize> = (0..n_cells)
        .filter(|flat| cell_ok(flat / (nr - 1), flat % (nr - 1)))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoIntersection(format!(
            "no sampled region is compatible with g²_s = {g2_signal_measured:.4} and \
             g²_i = {g2_idler_measured:.4} within ±{:.3} (the two isolines do not cross \
             inside the grid)",
            settings.g2_tolerance
        )));
    }

    // Stage 1b: cluster 4-adjacent candidate cells so each connected
    // compatible region is polished exactly once.
    let mut sets = DisjointSet::new(n_cells);
    let is_candidate: Vec<bool> = {
        let mut v = vec![false; n_cells];
        for &c in &candidates {
            v[c] = true;
        }
        v
    };
    for &flat in &candidates {
        let (i, j) = (flat / (nr - 1), flat % (nr - 1));
        if i + 1 < na - 1 && is_candidate[flat + (nr - 1)] {
            sets.union(flat, flat + (nr - 1));
        }
        if j + 1 < nr - 1 && is_candidate[flat + 1] {
            sets.union(flat, flat + 1);
        }
    }
    let mut cluster_seeds: Vec<(usize, LossParams, f64)> = Vec::new();
    for &flat in &candidates {
        let root = sets.find(flat);
        let (i, j) = (flat / (nr - 1), flat % (nr - 1));
        // best corner of this cell as a seed candidate
        let mut best: Option<(LossParams, f64)> = None;
        for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let s = map.g2_signal[[i + di, j + dj]] - g2_signal_measured;
            let t = map.g2_idler[[i + di, j + dj]] - g2_idler_measured;
            let miss = s.hypot(t);
            if best.as_ref().map_or(true, |(_, m)| miss < *m) {
                best = Some((
                    LossParams {
                        alpha_bar: map.alpha_axis[i + di],
                        r: map.r_axis[j + dj],
                    },
                    miss,
                ));
            }
        }
        let (params, miss) = best.expect("cell has corners");
        match cluster_seeds.iter_mut().find(|(r, _, _)| *r == root) {
            Some(entry) => {
                if miss < entry.2 {
                    entry.1 = params;
                    entry.2 = miss;
                }
            }
            None => cluster_seeds.push((root, params, miss)),
        }
    }
    cluster_seeds.sort_by_key(|(root, _, _)| *root);

    // Stage 2: polish one root per cluster; drop clusters whose Newton
    // fails (their cells only looked compatible through interpolation).
    let mut roots: Vec<NewtonOutcome> = Vec::new();
    for (_, seed, _) in &cluster_seeds {
        match newton_polish(&forward, *seed, (g2_signal_measured, g2_idler_measured), settings)
        {
            Ok(outcome) => {
                let duplicate = roots.iter().any(|r| {
                    let rel_alpha = (r.params.alpha_bar - outcome.params.alpha_bar).abs()
                        / r.params.alpha_bar.max(outcome.params.alpha_bar).max(1e-9);
                    rel_alpha < 0.05 && (r.params.r - outcome.params.r).abs() < 0.02
                });
                if !duplicate {
                    roots.push(outcome);
                }
            }
            Err(_) => continue,
        }
    }
    match roots.len() {
        0 => Err(Error::NoIntersection(format!(
            "candidate region near the measured pair (g²_s = {g2_signal_measured:.4}, \
             g²_i = {g2_idler_measured:.4}) contains no exact root of the forward map"
        ))),
        1 => {
            let root = roots.remove(0);
            let r_n_check = match r_n_measured {
                None => RnCheck::NotChecked,
                Some(measured) => {
                    let predicted = root.point.imbalance;
                    if (measured - predicted).abs() <= settings.r_n_tolerance {
                        RnCheck::Consistent {
                            measured,
                            predicted,
                            tolerance: settings.r_n_tolerance,
                        }
                    } else {
                        RnCheck::Inconsistent {
                            measured,
                            predicted,
                            tolerance: settings.r_n_tolerance,
                        }
                    }
                }
            };
            Ok(LossEstimate {
                params: root.params,
                g2_signal: root.point.g2_signal,
                g2_idler: root.point.g2_idler,
                residual_signal: root.point.g2_signal - g2_signal_measured,
                residual_idler: root.point.g2_idler - g2_idler_measured,
                r_n_predicted: root.point.imbalance,
                n_signal: root.point.n_signal,
                n_idler: root.point.n_idler,
                iterations: root.iterations,
                r_n_check,
            })
        }
        _ => {
            let listing = roots
                .iter()
                .map(|r| {
                    format!("(alpha_bar={:.3} dB/cm, r={:+.3})", r.params.alpha_bar, r.params.r)
                })
                .collect::<Vec<_>>()
                .join(", ");
            Err(Error::Ambiguous(format!(
                "{} distinct parameter points reproduce the measured pair: {listing}",
                roots.len()
            )))
        }
    }
}

/// Invert a measured click-g² pair on the physical forward map.
pub fn invert_losses(
    model: &ForwardModel,
    map: &ForwardMapGrid,
    g2_signal_measured: f64,
    g2_idler_measured: f64,
    r_n_measured: Option<f64>,
    settings: &InversionSettings,
) -> Result<LossEstimate> {
    invert_losses_with(
        |p| model.forward(p),
        map,
        g2_signal_measured,
        g2_idler_measured,
        r_n_measured,
        settings,
    )
}

/// Level-set segments of both g² surfaces in the (ᾱ, r) plane, for external
/// plotting. Each entry is one straight segment `[[ᾱ₀, r₀], [ᾱ₁, r₁]]`
/// produced by marching squares on one grid cell (segments are not stitched
/// into global polylines).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsolineSet {
    pub level_signal: f64,
    pub level_idler: f64,
    pub signal: Vec<[[f64; 2]; 2]>,
    pub idler: Vec<[[f64; 2]; 2]>,
}

fn marching_squares(
    alpha_axis: &[f64],
    r_axis: &[f64],
    surface: &Array2<f64>,
    level: f64,
) -> Vec<[[f64; 2]; 2]> {
    let mut segments = Vec::new();
    for i in 0..alpha_axis.len().saturating_sub(1) {
        for j in 0..r_axis.len().saturating_sub(1) {
            // corner order: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1)
            let v = [
                surface[[i, j]] - level,
                surface[[i + 1, j]] - level,
                surface[[i + 1, j + 1]] - level,
                surface[[i, j + 1]] - level,
            ];
            if v.iter().any(|x| !x.is_finite()) {
                continue;
            }
            let p = [
                [alpha_axis[i], r_axis[j]],
                [alpha_axis[i + 1], r_axis[j]],
                [alpha_axis[i + 1], r_axis[j + 1]],
                [alpha_axis[i], r_axis[j + 1]],
            ];
            let mut crossings: Vec<[f64; 2]> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] < 0.0) != (v[b] < 0.0) {
                    let t = v[a] / (v[a] - v[b]);
                    crossings.push([
                        p[a][0] + t * (p[b][0] - p[a][0]),
                        p[a][1] + t * (p[b][1] - p[a][1]),
                    ]);
                }
            }
            match crossings.len() {
                2 => segments.push([crossings[0], crossings[1]]),
                4 => {
                    // saddle cell: split by the sign of the centre value
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre < 0.0) == (v[0] < 0.0) {
                        segments.push([crossings[0], crossings[3]]);
                        segments.push([crossings[1], crossings[2]]);
                    } else {
                        segments.push([crossings[0], crossings[1]]);
                        segments.push([crossings[2], crossings[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Extract the isolines of the two g² surfaces at the measured levels.
pub fn isolines(map: &ForwardMapGrid, level_signal: f64, level_idler: f64) -> IsolineSet {
    IsolineSet {
        level_signal,
        level_idler,
        signal: marching_squares(&map.alpha_axis, &map.r_axis, &map.g2_signal, level_signal),
        idler: marching_squares(&map.alpha_axis, &map.r_axis, &map.g2_idler, level_idler),
    }
}
