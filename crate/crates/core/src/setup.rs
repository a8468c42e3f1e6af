//! Physical setup: discrete frequency grid, dispersion model, pump spectrum,
//! and the coupling/propagation matrices that drive the master equation.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::units::{C_LIGHT, TWO_PI};
use crate::C64;

pub use crate::units::loss_db_per_cm_to_si;

/// Uniform discrete frequency axis shared by the signal and idler bands.
///
/// Both bands are centered on the same frequency (half the pump frequency for
/// degenerate type-II down-conversion); mode `m` sits at
/// `ω_m = omega_0 + m·delta_omega`. The quantization time `T = 2π/Δω` is the
/// repetition window implied by the discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omega_0: f64,
    delta_omega: f64,
    n_points: usize,
    quantization_time: f64,
    omega_center: f64,
}

impl FrequencyGrid {
    /// Grid of `n_points` frequencies spanning `omega_center ± half_width`,
    /// endpoints inclusive. Requires `n_points ≥ 2` and positive widths.
    pub fn centered(omega_center: f64, half_width: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidInput(format!(
                "a spanning frequency grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(half_width > 0.0) || !(omega_center > half_width) {
            return Err(Error::InvalidInput(format!(
                "frequency window must satisfy 0 < half_width < omega_center, got \
                 half_width = {half_width}, omega_center = {omega_center}"
            )));
        }
        let delta_omega = 2.0 * half_width / (n_points as f64 - 1.0);
        Ok(Self {
            omega_0: omega_center - half_width,
            delta_omega,
            n_points,
            quantization_time: TWO_PI / delta_omega,
            omega_center,
        })
    }

    /// Rebuild a grid from its stored raw fields (used by the state
    /// container loader, where bit-exact reconstruction matters).
    pub fn from_raw(
        omega_0: f64,
        delta_omega: f64,
        n_points: usize,
        omega_center: f64,
    ) -> Result<Self> {
        if n_points == 0 || !(omega_0 > 0.0) || !(delta_omega > 0.0) || !(omega_center > 0.0) {
            return Err(Error::InvalidInput(format!(
                "raw grid fields are unphysical: omega_0 = {omega_0}, \
                 delta_omega = {delta_omega}, n_points = {n_points}, \
                 omega_center = {omega_center}"
            )));
        }
        Ok(Self {
            omega_0,
            delta_omega,
            n_points,
            quantization_time: TWO_PI / delta_omega,
            omega_center,
        })
    }

    /// Degenerate one-mode-per-band grid used by analytic-oracle comparisons.
    /// `delta_omega` only sets the nominal quantization time.
    pub fn single_point(omega_center: f64, delta_omega: f64) -> Result<Self> {
        if !(omega_center > 0.0) || !(delta_omega > 0.0) {
            return Err(Error::InvalidInput(
                "single-point grid needs positive center frequency and spacing".into(),
            ));
        }
        Ok(Self {
            omega_0: omega_center,
            delta_omega,
            n_points: 1,
            quantization_time: TWO_PI / delta_omega,
            omega_center,
        })
    }

    /// Number of frequency points per band.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Grid spacing Δω (rad/s).
    pub fn delta_omega(&self) -> f64 {
        self.delta_omega
    }

    /// Lowest grid frequency ω_0 (rad/s).
    pub fn omega_0(&self) -> f64 {
        self.omega_0
    }

    /// Band center frequency (rad/s).
    pub fn omega_center(&self) -> f64 {
        self.omega_center
    }

    /// Quantization time T = 2π/Δω (s).
    pub fn quantization_time(&self) -> f64 {
        self.quantization_time
    }

    /// Frequency of mode `m` (rad/s), constructed—not accumulated—so the grid
    /// is exactly uniform.
    pub fn omega(&self, m: usize) -> f64 {
        self.omega_0 + m as f64 * self.delta_omega
    }

    /// All mode frequencies (rad/s).
    pub fn omegas(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n_points).map(|m| self.omega(m)))
    }

    /// Detuning of mode `m` from the band center, as ordinary frequency in
    /// THz (the axis used in spectral output).
    pub fn detuning_thz(&self, m: usize) -> f64 {
        crate::units::angular_to_thz(self.omega(m) - self.omega_center)
    }
}

/// First-order (linear) dispersion model of one polarization/frequency band:
/// refractive index `n_ref` and group velocity `v_g` at a reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionBranch {
    n_ref: f64,
    v_g: f64,
    omega_ref: f64,
}

impl DispersionBranch {
    /// Requires `n_ref > 0`, `0 < v_g < c`, `omega_ref > 0`.
    pub fn new(n_ref: f64, v_g: f64, omega_ref: f64) -> Result<Self> {
        if !(n_ref > 0.0) {
            return Err(Error::InvalidInput(format!(
                "refractive index must be positive, got {n_ref}"
            )));
        }
        if !(v_g > 0.0 && v_g < C_LIGHT) {
            return Err(Error::InvalidInput(format!(
                "group velocity must lie in (0, c), got {v_g} m/s"
            )));
        }
        if !(omega_ref > 0.0) {
            return Err(Error::InvalidInput(format!(
                "reference frequency must be positive, got {omega_ref}"
            )));
        }
        Ok(Self { n_ref, v_g, omega_ref })
    }

    pub fn n_ref(&self) -> f64 {
        self.n_ref
    }

    pub fn group_velocity(&self) -> f64 {
        self.v_g
    }

    pub fn omega_ref(&self) -> f64 {
        self.omega_ref
    }

    /// Linear-in-frequency refractive index
    /// `n(ω) = n_ref + ((ω − ω_ref)/ω_ref)·(c/v_g − n_ref)`,
    /// whose slope reproduces the requested group velocity at `ω_ref`.
    pub fn refractive_index(&self, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!(
                "refractive index requested at non-positive frequency {omega}"
            )));
        }
        let slope = C_LIGHT / self.v_g - self.n_ref;
        Ok(self.n_ref + (omega - self.omega_ref) / self.omega_ref * slope)
    }

    /// Wavevector `k(ω) = n(ω)·ω/c` (1/m).
    pub fn wavevector(&self, omega: f64) -> Result<f64> {
        Ok(self.refractive_index(omega)? * omega / C_LIGHT)
    }
}

/// Transform-limited Gaussian pump pulse.
///
/// The spectral amplitude is normalized to `max |S| = 1` (all of the gain is
/// carried by the coupling strength Γ) and has zero spectral phase.
/// `fwhm_duration` is the full width at half maximum of the pulse
/// *intensity* in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpPulse {
    center_wavelength: f64,
    fwhm_duration: f64,
}

impl PumpPulse {
    pub fn new(center_wavelength: f64, fwhm_duration: f64) -> Result<Self> {
        if !(center_wavelength > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump wavelength must be positive, got {center_wavelength} m"
            )));
        }
        if !(fwhm_duration > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump duration must be positive, got {fwhm_duration} s"
            )));
        }
        Ok(Self { center_wavelength, fwhm_duration })
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }

    pub fn fwhm_duration(&self) -> f64 {
        self.fwhm_duration
    }

    /// Pump center angular frequency ω_p (rad/s).
    pub fn omega_p(&self) -> f64 {
        TWO_PI * C_LIGHT / self.center_wavelength
    }

    /// Normalization convention tag for the spectral amplitude.
    pub fn normalization_tag(&self) -> &'static str {
        "max-abs-one"
    }

    /// Spectral amplitude `S(ω) = exp(−(ω−ω_p)²·Δτ²/(8 ln 2))`: peak value 1
    /// at ω_p, zero phase, and an intensity-spectrum FWHM of
    /// `(2 ln 2/π)/Δτ` in ordinary frequency.
    pub fn spectrum(&self, omega: f64) -> C64 {
        let d = omega - self.omega_p();
        let ln2 = std::f64::consts::LN_2;
        C64::new((-(d * d) * self.fwhm_duration * self.fwhm_duration / (8.0 * ln2)).exp(), 0.0)
    }

    /// Normalized temporal intensity of the pump, `exp(−4 ln 2·t²/Δτ²)`,
    /// centered at t = 0 in the pump-retarded frame.
    pub fn temporal_intensity(&self, t: f64) -> f64 {
        let ln2 = std::f64::consts::LN_2;
        (-4.0 * ln2 * t * t / (self.fwhm_duration * self.fwhm_duration)).exp()
    }
}

/// Waveguide description: length, per-band dispersion, internal intensity
/// losses, quasi-phase-matching wavevector, and coupling strength Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideSpec {
    /// Length L (m).
    pub length: f64,
    /// Pump-band dispersion.
    pub pump: DispersionBranch,
    /// Signal-band dispersion.
    pub signal: DispersionBranch,
    /// Idler-band dispersion.
    pub idler: DispersionBranch,
    /// Signal intensity loss α_s (1/m).
    pub alpha_s: f64,
    /// Idler intensity loss α_i (1/m).
    pub alpha_i: f64,
    /// Quasi-phase-matching wavevector k_QPM (1/m).
    pub k_qpm: f64,
    /// Coupling strength Γ (1/m), paired with the unit-normalized pump
    /// spectrum.
    pub gamma: f64,
}

impl WaveguideSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "waveguide length must be positive, got {} m",
                self.length
            )));
        }
        if self.alpha_s < 0.0 || self.alpha_i < 0.0 {
            return Err(Error::InvalidInput(format!(
                "losses must be non-negative, got α_s = {}, α_i = {} (1/m)",
                self.alpha_s, self.alpha_i
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "coupling strength must be non-negative, got Γ = {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Copy with different loss coefficients (1/m).
    pub fn with_losses(&self, alpha_s: f64, alpha_i: f64) -> Self {
        Self { alpha_s, alpha_i, ..self.clone() }
    }

    /// Copy with a different coupling strength (1/m).
    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }
}

/// Quasi-phase-matching wavevector for degenerate type-II operation:
/// `k_QPM = (ω_p/2c)·(2 n_p(ω_p) − n_s(ω_p/2) − n_i(ω_p/2))`,
/// which cancels the phase mismatch of the band-center process exactly.
pub fn qpm_wavevector(
    pump: &DispersionBranch,
    signal: &DispersionBranch,
    idler: &DispersionBranch,
    omega_p: f64,
) -> Result<f64> {
    let np = pump.refractive_index(omega_p)?;
    let ns = signal.refractive_index(0.5 * omega_p)?;
    let ni = idler.refractive_index(0.5 * omega_p)?;
    Ok(omega_p / (2.0 * C_LIGHT) * (2.0 * np - ns - ni))
}

/// Pair-creation coupling matrix in the laboratory frame:
/// `J_ij(z) = S(ω_i + ω_j)·exp(i·(k_p(ω_i + ω_j) − k_QPM)·z)`.
///
/// `J` is complex-symmetric because both indices run over the same frequency
/// axis. Errors if `z` lies outside `[0, L]`.
pub fn coupling_matrix_j(
    wg: &WaveguideSpec,
    pulse: &PumpPulse,
    grid: &FrequencyGrid,
    z: f64,
) -> Result<Array2<C64>> {
    if !(0.0..=wg.length).contains(&z) {
        return Err(Error::InvalidInput(format!(
            "coupling matrix requested at z = {z} outside [0, {}]",
            wg.length
        )));
    }
    let n = grid.n_points();
    let mut j = Array2::<C64>::zeros((n, n));
    for a in 0..n {
        for b in 0..n {
            let wsum = grid.omega(a) + grid.omega(b);
            let phase = (wg.pump.wavevector(wsum)? - wg.k_qpm) * z;
            j[[a, b]] = pulse.spectrum(wsum) * C64::from_polar(1.0, phase);
        }
    }
    Ok(j)
}

/// Laboratory-frame linear propagation matrix `K` (diagonal, 2N×2N) and
/// coupling matrix `M(z)` (2N×2N) of the master equation.
///
/// `K = diag(κ^s_0…κ^s_{N−1}, κ^i_0…κ^i_{N−1})` with `κ = k + iα/2`;
/// `M(z)` has zero diagonal blocks and off-diagonal blocks `J(z)`, `Jᵀ(z)`.
pub fn assemble_k_and_m(
    wg: &WaveguideSpec,
    pulse: &PumpPulse,
    grid: &FrequencyGrid,
    z: f64,
) -> Result<(Array2<C64>, Array2<C64>)> {
    let n = grid.n_points();
    let mut k = Array2::<C64>::zeros((2 * n, 2 * n));
    for m in 0..n {
        let w = grid.omega(m);
        k[[m, m]] = C64::new(wg.signal.wavevector(w)?, 0.5 * wg.alpha_s);
        k[[n + m, n + m]] = C64::new(wg.idler.wavevector(w)?, 0.5 * wg.alpha_i);
    }
    let j = coupling_matrix_j(wg, pulse, grid, z)?;
    let mut m_mat = Array2::<C64>::zeros((2 * n, 2 * n));
    for a in 0..n {
        for b in 0..n {
            m_mat[[a, n + b]] = j[[a, b]];
            m_mat[[n + a, b]] = j[[b, a]];
        }
    }
    Ok((k, m_mat))
}

/// Precomputed z-independent pieces of the rotating-frame (interaction
/// picture) master equation.
///
/// The integrator removes the real wavevectors from the linear part and
/// transfers them into the coupling phase, leaving the slow residual
/// mismatch `Δk_nm = k_p(ω_n+ω_m) − k_QPM − k_s(ω_n) − k_i(ω_m)` — bounded
/// by the dispersion walk-off across the simulation window instead of the
/// absolute wavevectors. This keeps the phase advance per integration step
/// small enough for a fixed-step Runge–Kutta scheme at the default
/// resolution. Physical observables are restored to the laboratory
/// (pump-retarded) frame after propagation; see
/// [`restoration_phases`].
#[derive(Debug, Clone)]
pub struct CouplingTables {
    /// Pump spectral amplitude at sum frequencies, `S(ω_n + ω_m)`.
    pub s_sum: Array2<C64>,
    /// Residual phase mismatch rate `Δk_nm` (1/m).
    pub delta_k: Array2<f64>,
    /// Signal intensity loss (1/m).
    pub alpha_s: f64,
    /// Idler intensity loss (1/m).
    pub alpha_i: f64,
    /// Coupling strength Γ (1/m).
    pub gamma: f64,
    /// Waveguide length (m).
    pub length: f64,
}

impl CouplingTables {
    /// Rotating-frame coupling matrix `J̃(z) = S ∘ exp(i·Δk·z)`.
    pub fn coupling_at(&self, z: f64) -> Array2<C64> {
        let mut j = crate::linalg::phase_matrix(&self.delta_k, z);
        crate::linalg::hadamard_in_place(&mut j, &self.s_sum);
        j
    }

    /// Elementwise phase advance `exp(i·Δk·h)` used to step `J̃` forward by
    /// `h` without re-evaluating the exponentials.
    pub fn phase_step(&self, h: f64) -> Array2<C64> {
        crate::linalg::phase_matrix(&self.delta_k, h)
    }
}

/// Build the rotating-frame tables for a waveguide/pump/grid combination.
pub fn interaction_tables(
    wg: &WaveguideSpec,
    pulse: &PumpPulse,
    grid: &FrequencyGrid,
) -> Result<CouplingTables> {
    wg.validate()?;
    let n = grid.n_points();
    let mut s_sum = Array2::<C64>::zeros((n, n));
    let mut delta_k = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        let ka = wg.signal.wavevector(grid.omega(a))?;
        for b in 0..n {
            let wsum = grid.omega(a) + grid.omega(b);
            let kb = wg.idler.wavevector(grid.omega(b))?;
            s_sum[[a, b]] = pulse.spectrum(wsum);
            delta_k[[a, b]] = wg.pump.wavevector(wsum)? - wg.k_qpm - ka - kb;
        }
    }
    Ok(CouplingTables {
        s_sum,
        delta_k,
        alpha_s: wg.alpha_s,
        alpha_i: wg.alpha_i,
        gamma: wg.gamma,
        length: wg.length,
    })
}

/// Per-mode phases `θ^X_n = (k_X(ω_n) − ω_n/v_g^pump)·z` that return a
/// rotating-frame state at position `z` to the laboratory frame *retarded by
/// the pump transit time* (the frame in which the pump pulse stays centered
/// at t = 0). Returns `(θ_signal, θ_idler)`.
pub fn restoration_phases(
    wg: &WaveguideSpec,
    grid: &FrequencyGrid,
    z: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = grid.n_points();
    let vg_p = wg.pump.group_velocity();
    let mut th_s = Array1::<f64>::zeros(n);
    let mut th_i = Array1::<f64>::zeros(n);
    for m in 0..n {
        let w = grid.omega(m);
        th_s[m] = (wg.signal.wavevector(w)? - w / vg_p) * z;
        th_i[m] = (wg.idler.wavevector(w)? - w / vg_p) * z;
    }
    Ok((th_s, th_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_fixtures::{reference_grid, reference_waveguide};
    use approx::assert_relative_eq;

    #[test]
    fn grid_is_exactly_uniform_and_consistent() {
        let g = reference_grid(192);
        assert_eq!(g.n_points(), 192);
        // spacing uniform to within rounding of the large absolute offset
        for m in 0..191 {
            assert_relative_eq!(
                g.omega(m + 1) - g.omega(m),
                g.delta_omega(),
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            g.quantization_time() * g.delta_omega(),
            TWO_PI,
            max_relative = 1e-15
        );
        // window endpoints inclusive at ±4 THz
        assert_relative_eq!(g.detuning_thz(0), -4.0, max_relative = 1e-12);
        assert_relative_eq!(g.detuning_thz(191), 4.0, max_relative = 1e-12);
        assert!(FrequencyGrid::centered(1e15, 1e13, 1).is_err());
    }

    #[test]
    fn refractive_index_linear_form() {
        let (wg, pulse) = reference_waveguide();
        let wp = pulse.omega_p();
        // at the expansion point
        assert_relative_eq!(wg.pump.refractive_index(wp).unwrap(), 1.9, max_relative = 1e-15);
        // hand evaluation at 1.01·ω_ref: 1.9 + 0.01·(1.9/0.9 − 1.9)
        let expect = 1.9 + 0.01 * (1.9 / 0.9 - 1.9);
        assert_relative_eq!(
            wg.pump.refractive_index(1.01 * wp).unwrap(),
            expect,
            max_relative = 1e-12
        );
        assert_relative_eq!(expect, 1.9021, epsilon = 1e-4);
        // dispersionless when v_g = c/n: affine bracket vanishes
        let flat = DispersionBranch::new(1.5, C_LIGHT / 1.5, wp).unwrap();
        assert_relative_eq!(flat.refractive_index(1.3 * wp).unwrap(), 1.5, max_relative = 1e-14);
        // affine in ω: second finite difference vanishes
        let n1 = wg.signal.refractive_index(0.5 * wp).unwrap();
        let n2 = wg.signal.refractive_index(0.6 * wp).unwrap();
        let n3 = wg.signal.refractive_index(0.7 * wp).unwrap();
        assert!((n3 - 2.0 * n2 + n1).abs() < 1e-12);
        assert!(wg.pump.refractive_index(-1.0).is_err());
    }

    #[test]
    fn wavevector_closed_form() {
        let (_, pulse) = reference_waveguide();
        let wp = pulse.omega_p();
        // constant n = 1.9 at ω = 2πc/755nm → k = 1.9·2π/755e−9
        let flat = DispersionBranch::new(1.9, C_LIGHT / 1.9, wp).unwrap();
        let k = flat.wavevector(wp).unwrap();
        assert_relative_eq!(k, 1.9 * TWO_PI / 755e-9, max_relative = 1e-13);
        assert_relative_eq!(k, 1.581e7, max_relative = 1e-3);
        // vacuum: k = ω/c
        let vac = DispersionBranch::new(1.0, 0.99 * C_LIGHT, wp).unwrap();
        assert_relative_eq!(vac.wavevector(wp).unwrap(), wp / C_LIGHT, max_relative = 1e-12);
    }

    #[test]
    fn qpm_wavevector_reference_value() {
        let (wg, pulse) = reference_waveguide();
        // (ω_p/2c)(2·1.9 − 1.9 − 1.8) = 0.1·π/λ_p
        assert_relative_eq!(
            wg.k_qpm,
            0.1 * std::f64::consts::PI / 755e-9,
            max_relative = 1e-12
        );
        assert_relative_eq!(wg.k_qpm, 4.161e5, max_relative = 1e-3);
        // degenerate indices → 0
        let wp = pulse.omega_p();
        let b = DispersionBranch::new(1.9, 0.9 * C_LIGHT / 1.9, wp).unwrap();
        let b2 = DispersionBranch::new(1.9, 0.9 * C_LIGHT / 1.9, 0.5 * wp).unwrap();
        assert_relative_eq!(
            qpm_wavevector(&b, &b2, &b2, wp).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        // linear in the index combination: doubling (2n_p − n_s − n_i) doubles k_QPM
        let idler_heavier = DispersionBranch::new(1.7, wg.idler.group_velocity(), 0.5 * wp).unwrap();
        let k2 = qpm_wavevector(&wg.pump, &wg.signal, &idler_heavier, wp).unwrap();
        assert_relative_eq!(k2, 2.0 * wg.k_qpm, max_relative = 1e-10);
    }

    #[test]
    fn pump_spectrum_peak_width_and_decay() {
        let (_, pulse) = reference_waveguide();
        let wp = pulse.omega_p();
        assert_eq!(pulse.spectrum(wp), C64::new(1.0, 0.0));
        // intensity-spectrum FWHM = (2 ln 2/π)/Δτ ≈ 0.8825 THz at Δτ = 0.5 ps
        let fwhm_thz = 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI / 0.5e-12 / 1e12;
        assert_relative_eq!(fwhm_thz, 0.8825, epsilon = 1e-4);
        let half_edge = wp + crate::units::thz_to_angular(0.5 * fwhm_thz);
        let intensity = pulse.spectrum(half_edge).norm_sqr();
        assert_relative_eq!(intensity, 0.5, max_relative = 1e-10);
        // far detuned → 0
        assert!(pulse.spectrum(wp + crate::units::thz_to_angular(100.0)).norm() < 1e-200);
        // temporal intensity FWHM is Δτ
        assert_relative_eq!(pulse.temporal_intensity(0.25e-12), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn coupling_matrix_structure() {
        let (mut wg, pulse) = reference_waveguide();
        wg.alpha_s = loss_db_per_cm_to_si(3.0).unwrap();
        let grid = reference_grid(48);
        // z = 0: pure pump envelope, no phase
        let j0 = coupling_matrix_j(&wg, &pulse, &grid, 0.0).unwrap();
        for a in 0..48 {
            for b in 0..48 {
                assert_eq!(j0[[a, b]].im, 0.0);
                assert_relative_eq!(
                    j0[[a, b]].re,
                    pulse.spectrum(grid.omega(a) + grid.omega(b)).re,
                    max_relative = 1e-15
                );
            }
        }
        // peak normalization on the antidiagonal (ω_a + ω_b = ω_p exactly)
        let mut max_abs: f64 = 0.0;
        for a in 0..48 {
            max_abs = max_abs.max(j0[[a, 47 - a]].norm());
        }
        assert_relative_eq!(max_abs, 1.0, max_relative = 1e-12);
        // complex symmetry J = Jᵀ at finite z
        let jz = coupling_matrix_j(&wg, &pulse, &grid, 0.006).unwrap();
        for a in 0..48 {
            for b in 0..48 {
                assert!((jz[[a, b]] - jz[[b, a]]).norm() < 1e-15);
            }
        }
        // z out of range
        assert!(coupling_matrix_j(&wg, &pulse, &grid, -1e-9).is_err());
        assert!(coupling_matrix_j(&wg, &pulse, &grid, 0.011).is_err());
    }

    #[test]
    fn assembled_k_and_m_match_definitions() {
        let (mut wg, pulse) = reference_waveguide();
        wg.alpha_s = 100.0;
        wg.alpha_i = 40.0;
        let grid = reference_grid(16);
        let (k, m) = assemble_k_and_m(&wg, &pulse, &grid, 0.004).unwrap();
        // K diagonal entries match the per-branch wavevectors and losses
        for q in 0..16 {
            let w = grid.omega(q);
            assert_relative_eq!(
                k[[q, q]].re,
                wg.signal.wavevector(w).unwrap(),
                max_relative = 1e-14
            );
            assert_eq!(k[[q, q]].im, 50.0);
            assert_relative_eq!(
                k[[16 + q, 16 + q]].re,
                wg.idler.wavevector(w).unwrap(),
                max_relative = 1e-14
            );
            assert_eq!(k[[16 + q, 16 + q]].im, 20.0);
            // off-diagonal zero
            if q > 0 {
                assert_eq!(k[[q, q - 1]], C64::new(0.0, 0.0));
            }
        }
        // lossless K is real diagonal
        let lossless = wg.with_losses(0.0, 0.0);
        let (k0, _) = assemble_k_and_m(&lossless, &pulse, &grid, 0.0).unwrap();
        for q in 0..32 {
            assert_eq!(k0[[q, q]].im, 0.0);
        }
        // M is complex-symmetric with zero diagonal blocks
        for a in 0..32 {
            for b in 0..32 {
                assert!((m[[a, b]] - m[[b, a]]).norm() < 1e-15);
            }
        }
        for a in 0..16 {
            for b in 0..16 {
                assert_eq!(m[[a, b]], C64::new(0.0, 0.0));
                assert_eq!(m[[16 + a, 16 + b]], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn rotating_frame_tables_are_consistent_with_lab_frame() {
        let (wg, pulse) = reference_waveguide();
        // odd point count puts one mode exactly at the degeneracy frequency
        let grid = reference_grid(25);
        let tables = interaction_tables(&wg, &pulse, &grid).unwrap();
        // QPM is chosen to cancel the mismatch exactly at the degenerate
        // signal/idler pair.
        let mid = 12usize;
        let d_center = tables.delta_k[[mid, mid]];
        assert!(d_center.abs() < 1e-6, "center mismatch {d_center}");
        // away from degeneracy, group-velocity walk-off dominates Δk of
        // energy-conserving pairs: Δk(δ) ≈ −δ·(1/v_gs − 1/v_gi)
        let walkoff = 1.0 / wg.signal.group_velocity() - 1.0 / wg.idler.group_velocity();
        let delta = grid.omega(mid + 3) - grid.omega(mid);
        let d_pair = tables.delta_k[[mid + 3, mid - 3]];
        // 5% headroom for the quadratic dispersion correction
        assert_relative_eq!(d_pair, -delta * walkoff, max_relative = 0.05);
        // J̃(z) equals the lab J(z) dephased by the per-mode wavevectors
        let z = 0.0073;
        let jt = tables.coupling_at(z);
        let jlab = coupling_matrix_j(&wg, &pulse, &grid, z).unwrap();
        for a in 0..25 {
            let ka = wg.signal.wavevector(grid.omega(a)).unwrap();
            for b in 0..25 {
                let kb = wg.idler.wavevector(grid.omega(b)).unwrap();
                let expect = jlab[[a, b]] * C64::from_polar(1.0, -(ka + kb) * z);
                // accumulated phases are ~1e5 rad, so rounding limits
                // agreement to ~1e-10; 1e-8 is still far below physics
                assert!((jt[[a, b]] - expect).norm() < 1e-8);
            }
        }
        // residual mismatch is orders of magnitude below the raw wavevectors
        let max_dk = tables.delta_k.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(max_dk < 2e4, "max |Δk| = {max_dk}");
        assert!(wg.signal.wavevector(grid.omega(0)).unwrap() > 5e6);
    }

    #[test]
    fn phase_step_advances_coupling() {
        let (wg, pulse) = reference_waveguide();
        let grid = reference_grid(8);
        let tables = interaction_tables(&wg, &pulse, &grid).unwrap();
        let h = 1e-4;
        let mut j = tables.coupling_at(0.002);
        let step = tables.phase_step(h);
        crate::linalg::hadamard_in_place(&mut j, &step);
        let direct = tables.coupling_at(0.002 + h);
        for a in 0..8 {
            for b in 0..8 {
                assert!((j[[a, b]] - direct[[a, b]]).norm() < 1e-13);
            }
        }
    }
}
