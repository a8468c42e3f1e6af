//! Spatial master-equation integration of the correlation matrices along
//! the waveguide.
//!
//! The full equations of motion for the `2N×2N` correlation matrices are
//!
//! ```text
//! d𝒟/dz = i(𝒟K − K†𝒟) + iΓ(𝒞* Mᵀ − M* 𝒞)
//! d𝒞/dz = i(𝒞K + K𝒞)  + iΓ(𝒟ᵀMᵀ + Mᵀ + M𝒟)
//! ```
//!
//! with `K = diag(k + iα/2)` and the pump-mediated coupling `M`. The
//! conjugation on the left `K` factor of the 𝒟 equation is what makes loss
//! damp the populations; a plain transpose there would leave `tr 𝒟`
//! oscillating instead of decaying.
//!
//! Integrating these equations directly is wasteful: the wavevectors `k`
//! are ~1e7 m⁻¹, forcing nanometre steps. The integrator therefore works in
//! the interaction picture, where the fast per-mode phases are absorbed
//! into the coupling and only the *phase mismatch* (≲1e4 m⁻¹) and the loss
//! rates remain — see [`crate::setup::interaction_tables`]. On top of that,
//! for a type-II source only three blocks are ever populated (signal/idler
//! populations `D_a`, `D_b` and the pair block `C_ab`), so the right-hand
//! side reduces to four `N×N` products instead of products of `2N×2N`
//! matrices:
//!
//! ```text
//! dD_a  = −α_s·D_a + (A + A†),   A = iΓ·C̄_ab·J̃ᵀ
//! dD_b  = −α_i·D_b + (B + B†),   B = iΓ·C_ab†·J̃
//! dC_ab = −½(α_s+α_i)·C_ab + iΓ(J̃ + D_aᵀ·J̃ + J̃·D_b)
//! ```
//!
//! After integration the state is rotated into the frame co-moving with the
//! pump pulse (common time origin for all observables); see
//! [`crate::setup::restoration_phases`].

use ndarray::{Array1, Array2, Zip};

use faer::{Accum, Conj};

use crate::error::{Error, Result};
use crate::linalg::{fref, hadamard_in_place, mm_into, phase_vector};
use crate::setup::{
    interaction_tables, restoration_phases, CouplingTables, FrequencyGrid, PumpPulse,
    WaveguideSpec,
};
use crate::state::CorrelationState;
use crate::C64;

/// Fixed-step classical Runge–Kutta or adaptive Dormand–Prince 5(4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMethod {
    Rk4,
    Rk45,
}

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig {
    pub method: IntegrationMethod,
    /// For `Rk4` the number of equal steps over the device length; for
    /// `Rk45` the initial step is `length / step_count`.
    pub step_count: usize,
    /// Relative local-error tolerance (used by `Rk45` only).
    pub tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: IntegrationMethod::Rk4,
            step_count: 512,
            tolerance: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.step_count < 16 {
            return Err(Error::InvalidInput(format!(
                "integrator needs at least 16 steps, got {}",
                self.step_count
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-3) {
            return Err(Error::InvalidInput(format!(
                "integrator tolerance must lie in (0, 1e-3], got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Stable short name of the method, for provenance records.
    pub fn method_label(&self) -> &'static str {
        match self.method {
            IntegrationMethod::Rk4 => "rk4",
            IntegrationMethod::Rk45 => "rk45",
        }
    }
}

/// Photon numbers sampled along the device.
#[derive(Debug, Clone, Copy)]
pub struct PhotonSample {
    pub z: f64,
    pub n_signal: f64,
    pub n_idler: f64,
}

/// Outcome of a propagation run.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// Final state at `z = L`, expressed in the pump-retarded frame.
    pub state: CorrelationState,
    /// Photon numbers sampled along the device (including `z = 0` and
    /// `z = L`).
    pub photon_record: Vec<PhotonSample>,
    /// Largest Hermiticity violation of the population blocks observed
    /// before the per-step cleanup, `max‖D − D†‖_max`.
    pub max_hermiticity_drift: f64,
    /// Steps taken (accepted steps for the adaptive method).
    pub steps_taken: usize,
}

// ---------------------------------------------------------------------------
// Full-matrix right-hand side (any frame)
// ---------------------------------------------------------------------------

/// Right-hand side of the master equation for full `2N×2N` matrices and a
/// diagonal `K` given by its diagonal `kappa`. Works in any frame — pass
/// lab-frame `κ = k + iα/2` with the lab coupling, or interaction-picture
/// `κ = iα/2` with the dephased coupling.
pub(crate) fn master_rhs_diagonal(
    d: &Array2<C64>,
    c: &Array2<C64>,
    kappa: &Array1<C64>,
    m: &Array2<C64>,
    gamma: f64,
) -> (Array2<C64>, Array2<C64>) {
    let n2 = d.nrows();
    let ig = C64::new(0.0, gamma);
    let i = C64::new(0.0, 1.0);
    let mut dd = Array2::<C64>::zeros((n2, n2));
    let mut dc = Array2::<C64>::zeros((n2, n2));
    // dd = iΓ(c̄·mᵀ − m̄·c)
    mm_into(
        &mut dd,
        Accum::Replace,
        fref(c),
        Conj::Yes,
        fref(m).transpose(),
        Conj::No,
        ig,
    );
    mm_into(&mut dd, Accum::Add, fref(m), Conj::Yes, fref(c), Conj::No, -ig);
    // dc = iΓ(dᵀ·mᵀ + m·d)
    mm_into(
        &mut dc,
        Accum::Replace,
        fref(d).transpose(),
        Conj::No,
        fref(m).transpose(),
        Conj::No,
        ig,
    );
    mm_into(&mut dc, Accum::Add, fref(m), Conj::No, fref(d), Conj::No, ig);
    // elementwise: linear-in-κ terms and the spontaneous iΓ·mᵀ seed
    for a in 0..n2 {
        for b in 0..n2 {
            dd[[a, b]] += i * (kappa[b] - kappa[a].conj()) * d[[a, b]];
            dc[[a, b]] += i * (kappa[b] + kappa[a]) * c[[a, b]] + ig * m[[b, a]];
        }
    }
    (dd, dc)
}

/// Right-hand side of the master equation with a general (diagonal) `K`
/// passed as a full matrix, as produced by
/// [`crate::setup::assemble_k_and_m`]. Returns `(d𝒟/dz, d𝒞/dz)`.
pub fn master_rhs(
    d: &Array2<C64>,
    c: &Array2<C64>,
    k: &Array2<C64>,
    m: &Array2<C64>,
    gamma: f64,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let n2 = d.nrows();
    for (name, x) in [("𝒟", d), ("𝒞", c), ("K", k), ("M", m)] {
        if x.dim() != (n2, n2) {
            return Err(Error::InvalidInput(format!(
                "{name} must be {n2}×{n2}, got {:?}",
                x.dim()
            )));
        }
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "coupling strength must be finite and nonnegative, got {gamma}"
        )));
    }
    let kappa = Array1::from_iter((0..n2).map(|q| k[[q, q]]));
    Ok(master_rhs_diagonal(d, c, &kappa, m, gamma))
}

// ---------------------------------------------------------------------------
// Type-II blocked state and right-hand side
// ---------------------------------------------------------------------------

/// The three populated blocks of a type-II state.
#[derive(Clone)]
struct Blocks {
    da: Array2<C64>,
    db: Array2<C64>,
    cab: Array2<C64>,
}

impl Blocks {
    fn zeros(n: usize) -> Self {
        Self {
            da: Array2::zeros((n, n)),
            db: Array2::zeros((n, n)),
            cab: Array2::zeros((n, n)),
        }
    }

    fn assign(&mut self, other: &Self) {
        self.da.assign(&other.da);
        self.db.assign(&other.db);
        self.cab.assign(&other.cab);
    }

    /// `self += a·k`.
    fn axpy(&mut self, a: f64, k: &Self) {
        for (dst, src) in [(&mut self.da, &k.da), (&mut self.db, &k.db), (&mut self.cab, &k.cab)]
        {
            Zip::from(dst).and(src).for_each(|o, &kv| *o += kv * a);
        }
    }

    fn is_finite(&self) -> bool {
        let tr = |m: &Array2<C64>| -> C64 { (0..m.nrows()).map(|q| m[[q, q]]).sum() };
        tr(&self.da).is_finite() && tr(&self.db).is_finite() && tr(&self.cab).is_finite()
    }

    fn n_signal(&self) -> f64 {
        (0..self.da.nrows()).map(|q| self.da[[q, q]].re).sum()
    }

    fn n_idler(&self) -> f64 {
        (0..self.db.nrows()).map(|q| self.db[[q, q]].re).sum()
    }

    /// Largest deviation of the population blocks from Hermiticity.
    fn hermiticity_drift(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in [&self.da, &self.db] {
            let n = m.nrows();
            for a in 0..n {
                for b in a..n {
                    worst = worst.max((m[[a, b]] - m[[b, a]].conj()).norm());
                }
            }
        }
        worst
    }

    /// Re-impose `D = D†` on the population blocks (averages out integrator
    /// roundoff; `C_ab` carries no internal constraint).
    fn hermitize(&mut self) {
        for m in [&mut self.da, &mut self.db] {
            let n = m.nrows();
            for a in 0..n {
                m[[a, a]] = C64::new(m[[a, a]].re, 0.0);
                for b in (a + 1)..n {
                    let avg = 0.5 * (m[[a, b]] + m[[b, a]].conj());
                    m[[a, b]] = avg;
                    m[[b, a]] = avg.conj();
                }
            }
        }
    }
}

/// In-place symmetrization `X ← X + X†` (not the average — the sum, as
/// required by the `A + A†` structure of the population derivatives).
fn add_own_adjoint(m: &mut Array2<C64>) {
    let n = m.nrows();
    for a in 0..n {
        m[[a, a]] = C64::new(2.0 * m[[a, a]].re, 0.0);
        for b in (a + 1)..n {
            let x = m[[a, b]];
            let y = m[[b, a]];
            m[[a, b]] = x + y.conj();
            m[[b, a]] = y + x.conj();
        }
    }
}

/// Blocked interaction-picture right-hand side; writes into `out`.
fn blocked_rhs(
    out: &mut Blocks,
    y: &Blocks,
    j: &Array2<C64>,
    alpha_s: f64,
    alpha_i: f64,
    gamma: f64,
) {
    let ig = C64::new(0.0, gamma);
    // A = iΓ·C̄_ab·J̃ᵀ, then dD_a = (A + A†) − α_s·D_a
    mm_into(
        &mut out.da,
        Accum::Replace,
        fref(&y.cab),
        Conj::Yes,
        fref(j).transpose(),
        Conj::No,
        ig,
    );
    add_own_adjoint(&mut out.da);
    Zip::from(&mut out.da)
        .and(&y.da)
        .for_each(|o, &v| *o -= v * alpha_s);
    // B = iΓ·C_ab†·J̃, then dD_b = (B + B†) − α_i·D_b
    mm_into(
        &mut out.db,
        Accum::Replace,
        fref(&y.cab).transpose(),
        Conj::Yes,
        fref(j),
        Conj::No,
        ig,
    );
    add_own_adjoint(&mut out.db);
    Zip::from(&mut out.db)
        .and(&y.db)
        .for_each(|o, &v| *o -= v * alpha_i);
    // dC_ab = iΓ(D_aᵀ·J̃ + J̃·D_b + J̃) − ½(α_s+α_i)·C_ab
    mm_into(
        &mut out.cab,
        Accum::Replace,
        fref(&y.da).transpose(),
        Conj::No,
        fref(j),
        Conj::No,
        ig,
    );
    mm_into(
        &mut out.cab,
        Accum::Add,
        fref(j),
        Conj::No,
        fref(&y.db),
        Conj::No,
        ig,
    );
    let half_loss = 0.5 * (alpha_s + alpha_i);
    Zip::from(&mut out.cab)
        .and(&y.cab)
        .and(j)
        .for_each(|o, &cv, &jv| *o += ig * jv - cv * half_loss);
}

// ---------------------------------------------------------------------------
// Integrators
// ---------------------------------------------------------------------------

struct Integration {
    y: Blocks,
    photon_record: Vec<PhotonSample>,
    max_drift: f64,
    steps: usize,
}

fn integrate_rk4(tables: &CouplingTables, steps: usize) -> Result<Integration> {
    let (length, n) = (tables.length, tables.s_sum.nrows());
    let (alpha_s, alpha_i, gamma) = (tables.alpha_s, tables.alpha_i, tables.gamma);
    let h = length / steps as f64;
    let half_phase = tables.phase_step(0.5 * h);
    let record_stride = (steps / 64).max(1);
    let refresh_stride = 64usize;

    let mut y = Blocks::zeros(n);
    let mut k = Blocks::zeros(n);
    let mut ytmp = Blocks::zeros(n);
    let mut acc = Blocks::zeros(n);
    let mut j = tables.coupling_at(0.0);
    let mut record = Vec::with_capacity(steps / record_stride + 2);
    record.push(PhotonSample { z: 0.0, n_signal: 0.0, n_idler: 0.0 });
    let mut max_drift = 0.0f64;

    for step in 0..steps {
        let z = step as f64 * h;
        if step % refresh_stride == 0 {
            // resynchronize the incrementally-updated phases
            j = tables.coupling_at(z);
        }
        // k1 at z
        blocked_rhs(&mut k, &y, &j, alpha_s, alpha_i, gamma);
        acc.assign(&y);
        acc.axpy(h / 6.0, &k);
        ytmp.assign(&y);
        ytmp.axpy(0.5 * h, &k);
        // k2, k3 at z + h/2
        hadamard_in_place(&mut j, &half_phase);
        blocked_rhs(&mut k, &ytmp, &j, alpha_s, alpha_i, gamma);
        acc.axpy(h / 3.0, &k);
        ytmp.assign(&y);
        ytmp.axpy(0.5 * h, &k);
        blocked_rhs(&mut k, &ytmp, &j, alpha_s, alpha_i, gamma);
        acc.axpy(h / 3.0, &k);
        ytmp.assign(&y);
        ytmp.axpy(h, &k);
        // k4 at z + h
        hadamard_in_place(&mut j, &half_phase);
        blocked_rhs(&mut k, &ytmp, &j, alpha_s, alpha_i, gamma);
        acc.axpy(h / 6.0, &k);
        std::mem::swap(&mut y, &mut acc);

        max_drift = max_drift.max(y.hermiticity_drift());
        y.hermitize();
        if !y.is_finite() {
            return Err(Error::Numerics(format!(
                "integration diverged at z = {:.6e} m",
                z + h
            )));
        }
        if (step + 1) % record_stride == 0 || step + 1 == steps {
            record.push(PhotonSample {
                z: z + h,
                n_signal: y.n_signal(),
                n_idler: y.n_idler(),
            });
        }
    }
    Ok(Integration { y, photon_record: record, max_drift, steps })
}

/// Dormand–Prince 5(4) coefficients.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Error-estimate weights `b5 − b4`.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn scaled_error_norm(err: &Blocks, y: &Blocks, ynew: &Blocks, atol: f64, rtol: f64) -> f64 {
    let mut worst = 0.0f64;
    for (e, (a, b)) in [
        (&err.da, (&y.da, &ynew.da)),
        (&err.db, (&y.db, &ynew.db)),
        (&err.cab, (&y.cab, &ynew.cab)),
    ] {
        Zip::from(e).and(a).and(b).for_each(|&ev, &av, &bv| {
            let sc = atol + rtol * av.norm().max(bv.norm());
            worst = worst.max(ev.norm() / sc);
        });
    }
    worst
}

fn integrate_rk45(tables: &CouplingTables, initial_steps: usize, rtol: f64) -> Result<Integration> {
    const ATOL: f64 = 1e-14;
    const MAX_STEPS: usize = 200_000;
    let (length, n) = (tables.length, tables.s_sum.nrows());
    let (alpha_s, alpha_i, gamma) = (tables.alpha_s, tables.alpha_i, tables.gamma);
    let mut y = Blocks::zeros(n);
    let mut stages: Vec<Blocks> = (0..7).map(|_| Blocks::zeros(n)).collect();
    let mut ytmp = Blocks::zeros(n);
    let mut ynew = Blocks::zeros(n);
    let mut err = Blocks::zeros(n);
    let mut record = vec![PhotonSample { z: 0.0, n_signal: 0.0, n_idler: 0.0 }];
    let mut max_drift = 0.0f64;

    let mut z = 0.0f64;
    let mut h = length / initial_steps as f64;
    let mut accepted = 0usize;
    let mut attempts = 0usize;
    let mut k1_fresh = false;

    while z < length {
        h = h.min(length - z);
        if h < length * 1e-12 {
            return Err(Error::Numerics(
                "adaptive integrator step size collapsed".into(),
            ));
        }
        attempts += 1;
        if attempts > MAX_STEPS {
            return Err(Error::Numerics(format!(
                "adaptive integrator exceeded {MAX_STEPS} step attempts"
            )));
        }
        if !k1_fresh {
            let j = tables.coupling_at(z);
            blocked_rhs(&mut stages[0], &y, &j, alpha_s, alpha_i, gamma);
        }
        for s in 1..7 {
            ytmp.assign(&y);
            for (q, &a) in DP_A[s].iter().enumerate().take(s) {
                if a != 0.0 {
                    // stages[q] is disjoint from ytmp; split to satisfy the
                    // borrow checker
                    let (head, _) = stages.split_at(s);
                    ytmp.axpy(h * a, &head[q]);
                }
            }
            let j = tables.coupling_at(z + DP_C[s] * h);
            let (head, tail) = stages.split_at_mut(s);
            let _ = head;
            blocked_rhs(&mut tail[0], &ytmp, &j, alpha_s, alpha_i, gamma);
        }
        // 5th-order solution is the stage-7 argument (FSAL construction):
        // ynew = y + h·Σ a7q·kq, already formed as the last ytmp
        ynew.assign(&ytmp);
        // error estimate h·Σ e_q·k_q
        err.da.fill(C64::new(0.0, 0.0));
        err.db.fill(C64::new(0.0, 0.0));
        err.cab.fill(C64::new(0.0, 0.0));
        for (q, &e) in DP_E.iter().enumerate() {
            if e != 0.0 {
                err.axpy(h * e, &stages[q]);
            }
        }
        let ratio = scaled_error_norm(&err, &y, &ynew, ATOL, rtol);
        if ratio <= 1.0 {
            z += h;
            accepted += 1;
            std::mem::swap(&mut y, &mut ynew);
            max_drift = max_drift.max(y.hermiticity_drift());
            y.hermitize();
            if !y.is_finite() {
                return Err(Error::Numerics(format!(
                    "integration diverged at z = {z:.6e} m"
                )));
            }
            // FSAL: the last stage evaluated at (z, y) becomes k1
            stages.swap(0, 6);
            k1_fresh = true;
            record.push(PhotonSample {
                z,
                n_signal: y.n_signal(),
                n_idler: y.n_idler(),
            });
        } else {
            k1_fresh = true; // y unchanged, k1 still valid
        }
        let factor = if ratio > 0.0 {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok(Integration { y, photon_record: record, max_drift, steps: accepted })
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Propagate the vacuum through the waveguide and return the output state in
/// the pump-retarded frame, along with photon-number samples and integrator
/// diagnostics.
pub fn propagate(
    wg: &WaveguideSpec,
    pulse: &PumpPulse,
    grid: &FrequencyGrid,
    cfg: &IntegratorConfig,
) -> Result<PropagationResult> {
    wg.validate()?;
    cfg.validate()?;
    let n = grid.n_points();
    let tables = interaction_tables(wg, pulse, grid)?;
    let mut result = match cfg.method {
        IntegrationMethod::Rk4 => integrate_rk4(&tables, cfg.step_count)?,
        IntegrationMethod::Rk45 => integrate_rk45(&tables, cfg.step_count, cfg.tolerance)?,
    };

    // Rotate into the frame co-moving with the pump pulse: the interaction
    // picture stripped each mode's full e^{ikz}; restore the physical
    // dispersion relative to the pump's group motion so that all
    // time-domain observables share one time origin.
    let (th_s, th_i) = restoration_phases(wg, grid, wg.length)?;
    let phi_s = phase_vector(&th_s, 1.0);
    let phi_i = phase_vector(&th_i, 1.0);
    for a in 0..n {
        for b in 0..n {
            let y = &mut result.y;
            y.da[[a, b]] *= phi_s[a].conj() * phi_s[b];
            y.db[[a, b]] *= phi_i[a].conj() * phi_i[b];
            y.cab[[a, b]] *= phi_s[a] * phi_i[b];
        }
    }

    let state = CorrelationState::from_type_ii_blocks(
        grid.clone(),
        wg.length,
        result.y.da,
        result.y.db,
        result.y.cab,
    )?;
    Ok(PropagationResult {
        state,
        photon_record: result.photon_record,
        max_hermiticity_drift: result.max_drift,
        steps_taken: result.steps,
    })
}

/// Second-order moments of the exactly solvable single-pair-of-modes
/// problem (one signal mode coupled to one idler mode with gain `g` and
/// loss rates `α_s`, `α_i`):
///
/// ```text
/// dn_a/dz = −α_s n_a + 2gv        dn_b/dz = −α_i n_b + 2gv
/// dv/dz   = −½(α_s+α_i)v + g(1 + n_a + n_b)
/// ```
///
/// with `⟨âb̂⟩ = i·v`. Solved in closed form through the exponential of the
/// constant 4×4 system matrix (augmented with the inhomogeneity), so it is
/// an independent oracle for the matrix integrator.
#[derive(Debug, Clone, Copy)]
pub struct TwoModeMoments {
    pub n_signal: f64,
    pub n_idler: f64,
    pub pair_correlation: C64,
}

pub fn two_mode_analytic_oracle(
    gain: f64,
    alpha_s: f64,
    alpha_i: f64,
    z: f64,
) -> Result<TwoModeMoments> {
    for (name, v) in [("gain", gain), ("alpha_s", alpha_s), ("alpha_i", alpha_i), ("z", z)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let g = gain;
    let half_loss = 0.5 * (alpha_s + alpha_i);
    #[rustfmt::skip]
    let m = nalgebra::Matrix4::new(
        -alpha_s, 0.0,      2.0 * g,    0.0,
        0.0,      -alpha_i, 2.0 * g,    0.0,
        g,        g,        -half_loss, g,
        0.0,      0.0,      0.0,        0.0,
    ) * z;
    let e = m.exp();
    Ok(TwoModeMoments {
        n_signal: e[(0, 3)],
        n_idler: e[(1, 3)],
        pair_correlation: C64::new(0.0, e[(2, 3)]),
    })
}
