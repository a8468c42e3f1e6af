//! Physical constants and the unit conversions applied at the configuration
//! boundary.
//!
//! All internal computation uses SI units (m, s, rad/s, 1/m). Configuration
//! files use the laboratory-friendly units named in the function signatures
//! below (nm, ps, mm, THz, dB/cm); each quantity is converted exactly once,
//! when the configuration is loaded.

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 299_792_458.0;

/// 2π, used to convert between ordinary and angular frequency.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Vacuum wavelength in nm → angular frequency in rad/s.
pub fn wavelength_nm_to_omega(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavelength must be positive, got {lambda_nm} nm"
        )));
    }
    Ok(TWO_PI * C_LIGHT / (lambda_nm * 1e-9))
}

/// Millimetres → metres.
pub fn mm_to_m(x: f64) -> f64 {
    x * 1e-3
}

/// Picoseconds → seconds.
pub fn ps_to_s(x: f64) -> f64 {
    x * 1e-12
}

/// Ordinary frequency in THz → angular frequency in rad/s.
pub fn thz_to_angular(nu_thz: f64) -> f64 {
    TWO_PI * nu_thz * 1e12
}

/// Angular frequency in rad/s → ordinary frequency in THz.
pub fn angular_to_thz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e12)
}

/// Intensity (power) loss in dB/cm → intensity loss rate α in 1/m.
///
/// The returned α is defined so that photon number decays as `exp(−α z)` and
/// field amplitude as `exp(−α z / 2)`, consistent with complex mode
/// wavevectors κ = k + iα/2.
pub fn loss_db_per_cm_to_si(alpha_db_cm: f64) -> Result<f64> {
    if alpha_db_cm < 0.0 {
        return Err(Error::InvalidInput(format!(
            "loss coefficient must be non-negative, got {alpha_db_cm} dB/cm"
        )));
    }
    Ok(alpha_db_cm * 100.0 * std::f64::consts::LN_10 / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn loss_conversion_closed_forms() {
        assert_eq!(loss_db_per_cm_to_si(0.0).unwrap(), 0.0);
        assert_relative_eq!(
            loss_db_per_cm_to_si(10.0).unwrap(),
            230.258_509_299_404_57,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            loss_db_per_cm_to_si(1.0).unwrap(),
            23.025_850_929_940_457,
            max_relative = 1e-12
        );
        assert!(loss_db_per_cm_to_si(-1.0).is_err());
    }

    #[test]
    fn wavelength_to_omega_roundtrip() {
        let w = wavelength_nm_to_omega(755.0).unwrap();
        assert_relative_eq!(TWO_PI * C_LIGHT / w * 1e9, 755.0, max_relative = 1e-14);
        assert!(wavelength_nm_to_omega(0.0).is_err());
    }

    #[test]
    fn frequency_conversions_are_inverse() {
        let w = thz_to_angular(3.5);
        assert_relative_eq!(angular_to_thz(w), 3.5, max_relative = 1e-15);
    }
}
