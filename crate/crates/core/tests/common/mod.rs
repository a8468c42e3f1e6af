//! Shared helpers for the acceptance suite: configuration-derived setups,
//! seeded random unitaries, and the pass/fail reporting format.

use ndarray::Array2;
use pdc_sim::config::RunConfig;
use pdc_sim::propagation::IntegratorConfig;
use pdc_sim::setup::{FrequencyGrid, PumpPulse, WaveguideSpec};
use pdc_sim::C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// The checked-in reference device: 1 cm waveguide, 755 nm / 0.5 ps pump,
/// group-velocity-matched idler and 5% signal walk-off.
pub fn reference_config() -> RunConfig {
    RunConfig::from_str(pdc_sim::config::REFERENCE_TOML, false, &[]).expect("reference config")
}

pub fn reference_setup() -> (WaveguideSpec, PumpPulse, FrequencyGrid, IntegratorConfig) {
    reference_config().to_setup().expect("reference setup")
}

/// Same device with a different grid density and integrator step count:
/// coarser for the scan-heavy criteria, finer for the convergence checks.
pub fn regridded_setup(
    points: usize,
    steps: usize,
) -> (WaveguideSpec, PumpPulse, FrequencyGrid, IntegratorConfig) {
    let mut config = reference_config();
    config.grid.points = points;
    config.integrator.steps = steps;
    config.validate().expect("reduced config");
    config.to_setup().expect("reduced setup")
}

/// Haar-like random unitary via modified Gram-Schmidt on a random complex
/// matrix. Exactness of unitarity (not Haar measure) is what the invariance
/// tests rely on.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((n, n));
    for v in m.iter_mut() {
        *v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    for k in 0..n {
        for j in 0..k {
            let proj: C64 = (0..n).map(|i| m[[i, j]].conj() * m[[i, k]]).sum();
            for i in 0..n {
                let sub = proj * m[[i, j]];
                m[[i, k]] -= sub;
            }
        }
        let norm: f64 = (0..n).map(|i| m[[i, k]].norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-8, "degenerate random matrix column");
        for i in 0..n {
            m[[i, k]] /= norm;
        }
    }
    m
}

/// Emit the one-line verdict for a criterion and return whether it passed,
/// so the caller can `assert!` afterwards.
pub fn verdict(label: &str, pass: bool, detail: &str) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("acceptance criterion {label}: {tag} — {detail}");
    pass
}

/// Uniform sample in a closed interval.
pub fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

/// `n` evenly spaced values covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}
