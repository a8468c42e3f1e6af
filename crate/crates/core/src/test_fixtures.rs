//! Shared unit-test fixture: the worked reference waveguide used across
//! module tests.

use crate::setup::{
    qpm_wavevector, DispersionBranch, FrequencyGrid, PumpPulse, WaveguideSpec,
};
use crate::units::{thz_to_angular, C_LIGHT};

/// Waveguide of the worked reference configuration: L = 1 cm, pump at
/// 755 nm with 0.5 ps pulses, n_p = n_s = 1.9 and n_i = 1.8,
/// v_g^p = 0.9c/1.9, v_g^s = 0.95·v_g^p, v_g^i = v_g^p. Lossless, Γ = 1.
pub(crate) fn reference_waveguide() -> (WaveguideSpec, PumpPulse) {
    let pulse = PumpPulse::new(755e-9, 0.5e-12).unwrap();
    let wp = pulse.omega_p();
    let vg_p = 0.9 * C_LIGHT / 1.9;
    let pump = DispersionBranch::new(1.9, vg_p, wp).unwrap();
    let signal = DispersionBranch::new(1.9, 0.95 * vg_p, 0.5 * wp).unwrap();
    let idler = DispersionBranch::new(1.8, vg_p, 0.5 * wp).unwrap();
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
    (wg, pulse)
}

/// `n`-point frequency window of half-width 4 THz around the degeneracy
/// frequency of the reference waveguide.
pub(crate) fn reference_grid(n: usize) -> FrequencyGrid {
    let (_, pulse) = reference_waveguide();
    FrequencyGrid::centered(0.5 * pulse.omega_p(), thz_to_angular(4.0), n).unwrap()
}
