//! Run configuration: schema, loading (TOML or JSON), dotted-path
//! overrides, validation, and conversion into the SI-unit simulation
//! objects.
//!
//! Configuration files carry laboratory units (nm, ps, mm, THz, dB/cm);
//! [`RunConfig::to_setup`] converts each quantity to SI exactly once.
//! Unknown keys anywhere in the file are rejected so that typos fail loudly
//! instead of silently running defaults.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::inversion::InversionSettings;
use crate::propagation::{IntegrationMethod, IntegratorConfig};
use crate::setup::{
    qpm_wavevector, DispersionBranch, FrequencyGrid, PumpPulse, WaveguideSpec,
};
use crate::units::{loss_db_per_cm_to_si, mm_to_m, ps_to_s, thz_to_angular, C_LIGHT};

/// One dispersion branch: phase index at the reference frequency and group
/// velocity as a fraction of the vacuum speed of light.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSection {
    pub n: f64,
    pub group_velocity_over_c: f64,
}

/// `[waveguide]`: device length, per-branch dispersion, internal losses,
/// quasi-phase-matching, and the coupling strength Γ.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideSection {
    pub length_mm: f64,
    #[serde(default)]
    pub loss_signal_db_cm: f64,
    #[serde(default)]
    pub loss_idler_db_cm: f64,
    /// Poling wavevector (1/m). Omit to phase-match the degenerate process
    /// ω_p → ω_p/2 + ω_p/2 exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_qpm_per_m: Option<f64>,
    /// Coupling strength Γ (1/m), the single gain knob of the model.
    pub gamma_per_m: f64,
    pub pump_branch: BranchSection,
    pub signal_branch: BranchSection,
    pub idler_branch: BranchSection,
}

/// `[pump]`: transform-limited Gaussian pump pulse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub wavelength_nm: f64,
    /// Intensity full width at half maximum of the pulse.
    pub fwhm_ps: f64,
}

/// `[grid]`: shared signal/idler frequency window, centred on half the
/// pump frequency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Half-width of the detuning window (THz, ordinary frequency).
    pub half_width_thz: f64,
    /// Frequency bins per band.
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { half_width_thz: 4.0, points: 192 }
    }
}

/// `[integrator]`: spatial integration controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// `"rk4"` (fixed step) or `"rk45"` (adaptive).
    pub method: String,
    pub steps: usize,
    pub tolerance: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self { method: "rk4".to_string(), steps: 512, tolerance: 1e-9 }
    }
}

/// `[hom]`: delay axis of the two-photon interference scan.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSection {
    pub tau_min_ps: f64,
    pub tau_max_ps: f64,
    pub tau_points: usize,
}

impl Default for HomSection {
    fn default() -> Self {
        Self { tau_min_ps: -6.0, tau_max_ps: 6.0, tau_points: 241 }
    }
}

/// `[temporal]`: time axis of the emitted temporal-intensity profiles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemporalSection {
    pub t_min_ps: f64,
    pub t_max_ps: f64,
    pub t_points: usize,
}

impl Default for TemporalSection {
    fn default() -> Self {
        Self { t_min_ps: -2.0, t_max_ps: 6.0, t_points: 241 }
    }
}

/// `[invert]`: measured values, tolerances, and the seeding grid of the
/// loss inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertSection {
    pub g2_signal: f64,
    pub g2_idler: f64,
    /// Optional measured photon-number imbalance for the consistency check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_n: Option<f64>,
    #[serde(default = "default_g2_tolerance")]
    pub g2_tolerance: f64,
    #[serde(default = "default_newton_tolerance")]
    pub newton_tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_r_n_tolerance")]
    pub r_n_tolerance: f64,
    #[serde(default = "default_alpha_min")]
    pub grid_alpha_min_db_cm: f64,
    #[serde(default = "default_alpha_max")]
    pub grid_alpha_max_db_cm: f64,
    #[serde(default = "default_axis_points")]
    pub grid_alpha_points: usize,
    #[serde(default = "default_r_min")]
    pub grid_r_min: f64,
    #[serde(default = "default_r_max")]
    pub grid_r_max: f64,
    #[serde(default = "default_axis_points")]
    pub grid_r_points: usize,
    /// Also emit the isoline segments of both measured levels as JSON.
    #[serde(default)]
    pub export_isolines: bool,
}

fn default_g2_tolerance() -> f64 {
    0.02
}
fn default_newton_tolerance() -> f64 {
    1e-4
}
fn default_max_iterations() -> usize {
    30
}
fn default_r_n_tolerance() -> f64 {
    0.05
}
fn default_alpha_min() -> f64 {
    0.5
}
fn default_alpha_max() -> f64 {
    20.0
}
fn default_axis_points() -> usize {
    61
}
fn default_r_min() -> f64 {
    -0.7
}
fn default_r_max() -> f64 {
    0.7
}

impl InvertSection {
    pub fn settings(&self) -> InversionSettings {
        InversionSettings {
            g2_tolerance: self.g2_tolerance,
            newton_tolerance: self.newton_tolerance,
            max_iterations: self.max_iterations,
            r_n_tolerance: self.r_n_tolerance,
        }
    }

    /// Mean-loss axis of the seeding grid (dB/cm).
    pub fn alpha_axis(&self) -> Result<Vec<f64>> {
        linspace("invert grid alpha_bar", self.grid_alpha_min_db_cm, self.grid_alpha_max_db_cm, self.grid_alpha_points)
    }

    /// Asymmetry axis of the seeding grid.
    pub fn r_axis(&self) -> Result<Vec<f64>> {
        linspace("invert grid r", self.grid_r_min, self.grid_r_max, self.grid_r_points)
    }
}

/// `[calibrate]`: target photon number of the Γ calibration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub target_photon_number: f64,
}

/// `[sweep]`: either a list of equal signal/idler losses, or a rectangular
/// (ᾱ, r) grid. Exactly one form must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Equal-loss sweep: one run per value, α_s = α_i = value (dB/cm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses_db_cm: Option<Vec<f64>>,
    /// Grid sweep: one run per (ᾱ, r) pair of the rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_bar_db_cm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_values: Option<Vec<f64>>,
}

/// The complete, schema-checked run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub waveguide: WaveguideSection,
    pub pump: PumpSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub hom: HomSection,
    #[serde(default)]
    pub temporal: TemporalSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invert: Option<InvertSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) {
        return Err(Error::Config(format!(
            "{name} axis needs at least 2 points with max > min (got [{lo}, {hi}] × {n})"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

impl RunConfig {
    /// Parse a configuration from text. `json` selects the JSON parser;
    /// otherwise TOML. `overrides` are `key.path=value` pairs applied on
    /// the raw tree before schema validation; intermediate tables are
    /// created as needed.
    pub fn from_str(text: &str, json: bool, overrides: &[String]) -> Result<Self> {
        let mut tree: serde_json::Value = if json {
            serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("JSON parse error: {e}")))?
        } else {
            toml::from_str(text)
                .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?
        };
        for entry in overrides {
            apply_override(&mut tree, entry)?;
        }
        let config: RunConfig = serde_json::from_value(tree)
            .map_err(|e| Error::Config(format!("configuration schema error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Load a configuration file; the extension picks the parser
    /// (`.json` → JSON, anything else → TOML).
    pub fn load(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str(&text, json, overrides)
    }

    /// Cross-field checks beyond what serde's types enforce.
    pub fn validate(&self) -> Result<()> {
        let w = &self.waveguide;
        for (label, b) in [
            ("pump", &w.pump_branch),
            ("signal", &w.signal_branch),
            ("idler", &w.idler_branch),
        ] {
            if !(b.n >= 1.0 && b.n.is_finite()) {
                return Err(Error::Config(format!(
                    "{label} branch: refractive index must be ≥ 1, got {}",
                    b.n
                )));
            }
            if !(b.group_velocity_over_c > 0.0 && b.group_velocity_over_c <= 1.0) {
                return Err(Error::Config(format!(
                    "{label} branch: group velocity must lie in (0, 1]·c, got {}c",
                    b.group_velocity_over_c
                )));
            }
        }
        if !(w.length_mm > 0.0) {
            return Err(Error::Config(format!(
                "waveguide length must be positive, got {} mm",
                w.length_mm
            )));
        }
        if w.loss_signal_db_cm < 0.0 || w.loss_idler_db_cm < 0.0 {
            return Err(Error::Config("losses must be non-negative".into()));
        }
        if !(w.gamma_per_m >= 0.0 && w.gamma_per_m.is_finite()) {
            return Err(Error::Config(format!(
                "gamma must be finite and ≥ 0, got {}",
                w.gamma_per_m
            )));
        }
        if !(self.pump.wavelength_nm > 0.0 && self.pump.fwhm_ps > 0.0) {
            return Err(Error::Config("pump wavelength and duration must be positive".into()));
        }
        if self.grid.points < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per band, got {}",
                self.grid.points
            )));
        }
        if !(self.grid.half_width_thz > 0.0) {
            return Err(Error::Config("grid half-width must be positive".into()));
        }
        match self.integrator.method.as_str() {
            "rk4" | "rk45" => {}
            other => {
                return Err(Error::Config(format!(
                    "integrator method must be \"rk4\" or \"rk45\", got \"{other}\""
                )))
            }
        }
        if self.hom.tau_points < 2 || !(self.hom.tau_max_ps > self.hom.tau_min_ps) {
            return Err(Error::Config("hom delay axis needs ≥ 2 points with max > min".into()));
        }
        if self.temporal.t_points < 2 || !(self.temporal.t_max_ps > self.temporal.t_min_ps) {
            return Err(Error::Config("temporal axis needs ≥ 2 points with max > min".into()));
        }
        if let Some(inv) = &self.invert {
            if !(inv.g2_signal.is_finite() && inv.g2_idler.is_finite()) {
                return Err(Error::Config("measured g² values must be finite".into()));
            }
            inv.alpha_axis()?;
            inv.r_axis()?;
        }
        if let Some(cal) = &self.calibrate {
            if !(cal.target_photon_number >= 0.0 && cal.target_photon_number.is_finite()) {
                return Err(Error::Config(
                    "calibration target photon number must be finite and ≥ 0".into(),
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            let list = sweep.losses_db_cm.is_some();
            let grid = sweep.alpha_bar_db_cm.is_some() || sweep.r_values.is_some();
            match (list, grid) {
                (true, false) => {
                    if sweep.losses_db_cm.as_ref().is_some_and(|v| v.is_empty()) {
                        return Err(Error::Config("sweep loss list is empty".into()));
                    }
                }
                (false, true) => {
                    let (Some(a), Some(r)) = (&sweep.alpha_bar_db_cm, &sweep.r_values) else {
                        return Err(Error::Config(
                            "grid sweep needs both alpha_bar_db_cm and r_values".into(),
                        ));
                    };
                    if a.is_empty() || r.is_empty() {
                        return Err(Error::Config("sweep grid axes must be non-empty".into()));
                    }
                }
                _ => {
                    return Err(Error::Config(
                        "sweep needs exactly one of: losses_db_cm, or the \
                         alpha_bar_db_cm + r_values pair"
                            .into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Build the SI-unit simulation objects. This is the single point where
    /// laboratory units leave the program.
    pub fn to_setup(&self) -> Result<(WaveguideSpec, PumpPulse, FrequencyGrid, IntegratorConfig)> {
        self.validate()?;
        let pulse = PumpPulse::new(self.pump.wavelength_nm * 1e-9, ps_to_s(self.pump.fwhm_ps))?;
        let wp = pulse.omega_p();
        let w = &self.waveguide;
        let branch = |b: &BranchSection, omega_ref: f64| {
            DispersionBranch::new(b.n, b.group_velocity_over_c * C_LIGHT, omega_ref)
        };
        let pump = branch(&w.pump_branch, wp)?;
        let signal = branch(&w.signal_branch, 0.5 * wp)?;
        let idler = branch(&w.idler_branch, 0.5 * wp)?;
        let k_qpm = match w.k_qpm_per_m {
            Some(k) => k,
            None => qpm_wavevector(&pump, &signal, &idler, wp)?,
        };
        let wg = WaveguideSpec {
            length: mm_to_m(w.length_mm),
            pump,
            signal,
            idler,
            alpha_s: loss_db_per_cm_to_si(w.loss_signal_db_cm)?,
            alpha_i: loss_db_per_cm_to_si(w.loss_idler_db_cm)?,
            k_qpm,
            gamma: w.gamma_per_m,
        };
        wg.validate()?;
        let grid = FrequencyGrid::centered(
            0.5 * wp,
            thz_to_angular(self.grid.half_width_thz),
            self.grid.points,
        )?;
        let method = match self.integrator.method.as_str() {
            "rk4" => IntegrationMethod::Rk4,
            _ => IntegrationMethod::Rk45,
        };
        let integrator = IntegratorConfig {
            method,
            step_count: self.integrator.steps,
            tolerance: self.integrator.tolerance,
        };
        integrator.validate()?;
        Ok((wg, pulse, grid, integrator))
    }

    /// Delay axis of the HOM scan, in seconds.
    pub fn hom_delays(&self) -> Result<Vec<f64>> {
        Ok(
            linspace("hom tau", self.hom.tau_min_ps, self.hom.tau_max_ps, self.hom.tau_points)?
                .into_iter()
                .map(ps_to_s)
                .collect(),
        )
    }

    /// Time axis of the temporal profiles, in seconds.
    pub fn temporal_times(&self) -> Result<Vec<f64>> {
        Ok(linspace(
            "temporal t",
            self.temporal.t_min_ps,
            self.temporal.t_max_ps,
            self.temporal.t_points,
        )?
        .into_iter()
        .map(ps_to_s)
        .collect())
    }

    /// SHA-256 of the canonical JSON form of the parsed configuration,
    /// after defaults and overrides. Identical physics → identical hash,
    /// regardless of file format or key order.
    pub fn canonical_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            use std::fmt::Write;
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Apply one `key.path=value` override to the raw configuration tree.
/// Values parse as JSON scalars when possible (numbers, booleans, quoted
/// strings, arrays) and fall back to bare strings.
fn apply_override(tree: &mut serde_json::Value, entry: &str) -> Result<()> {
    let Some((path, raw_value)) = entry.split_once('=') else {
        return Err(Error::Config(format!(
            "override \"{entry}\" is not of the form key.path=value"
        )));
    };
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override path \"{path}\" has empty segments")));
    }
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let mut cursor = tree;
    for segment in &segments[..segments.len() - 1] {
        if !cursor.is_object() {
            return Err(Error::Config(format!(
                "override path \"{path}\" crosses a non-table value at \"{segment}\""
            )));
        }
        cursor = cursor
            .as_object_mut()
            .expect("checked object")
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    let leaf = segments[segments.len() - 1];
    let Some(object) = cursor.as_object_mut() else {
        return Err(Error::Config(format!(
            "override path \"{path}\" ends inside a non-table value"
        )));
    };
    object.insert(leaf.to_string(), value);
    Ok(())
}

/// The reference configuration in TOML form, matching the worked
/// calibration anchor of this crate (see the repository README).
pub const REFERENCE_TOML: &str = r#"# Reference type-II down-conversion waveguide.
# L = 1 cm, pump 755 nm / 0.5 ps, n_p = n_s = 1.9, n_i = 1.8,
# v_g^p = 0.9 c / n_p, v_g^s = 0.95 v_g^p, v_g^i = v_g^p.

[waveguide]
length_mm = 10.0
loss_signal_db_cm = 0.0
loss_idler_db_cm = 0.0
gamma_per_m = 1.0

[waveguide.pump_branch]
n = 1.9
group_velocity_over_c = 0.47368421052631576

[waveguide.signal_branch]
n = 1.9
group_velocity_over_c = 0.45

[waveguide.idler_branch]
n = 1.8
group_velocity_over_c = 0.47368421052631576

[pump]
wavelength_nm = 755.0
fwhm_ps = 0.5

[grid]
half_width_thz = 4.0
points = 192

[integrator]
method = "rk4"
steps = 512
tolerance = 1e-9
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_fixtures::reference_waveguide;
    use approx::assert_relative_eq;

    #[test]
    fn reference_toml_round_trips_to_the_reference_setup() {
        let cfg = RunConfig::from_str(REFERENCE_TOML, false, &[]).unwrap();
        let (wg, pulse, grid, integrator) = cfg.to_setup().unwrap();
        let (wg_ref, pulse_ref) = reference_waveguide();
        assert_relative_eq!(wg.length, wg_ref.length, max_relative = 1e-15);
        assert_relative_eq!(pulse.omega_p(), pulse_ref.omega_p(), max_relative = 1e-15);
        assert_relative_eq!(
            wg.pump.group_velocity(),
            wg_ref.pump.group_velocity(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            wg.signal.group_velocity(),
            wg_ref.signal.group_velocity(),
            max_relative = 1e-15
        );
        assert_relative_eq!(wg.k_qpm, wg_ref.k_qpm, max_relative = 1e-12);
        assert_eq!(grid.n_points(), 192);
        assert_eq!(integrator.step_count, 512);
        assert_relative_eq!(
            grid.omega(191) - grid.omega_center(),
            thz_to_angular(4.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn json_and_toml_forms_agree() {
        let cfg_toml = RunConfig::from_str(REFERENCE_TOML, false, &[]).unwrap();
        let json_text = serde_json::to_string(&cfg_toml).unwrap();
        let cfg_json = RunConfig::from_str(&json_text, true, &[]).unwrap();
        assert_eq!(cfg_toml.canonical_hash(), cfg_json.canonical_hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = format!("{REFERENCE_TOML}\n[waveguide.extra]\nx = 1\n");
        let err = RunConfig::from_str(&bad, false, &[]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 2);
        let bad2 = REFERENCE_TOML.replace("length_mm", "length_cm");
        assert!(RunConfig::from_str(&bad2, false, &[]).is_err());
    }

    #[test]
    fn overrides_change_scalars_and_create_sections() {
        let overrides = vec![
            "waveguide.gamma_per_m=12.5".to_string(),
            "grid.points=64".to_string(),
            "integrator.method=rk45".to_string(),
            "calibrate.target_photon_number=2.1e-4".to_string(),
        ];
        let cfg = RunConfig::from_str(REFERENCE_TOML, false, &overrides).unwrap();
        assert_eq!(cfg.waveguide.gamma_per_m, 12.5);
        assert_eq!(cfg.grid.points, 64);
        assert_eq!(cfg.integrator.method, "rk45");
        assert_eq!(cfg.calibrate.unwrap().target_photon_number, 2.1e-4);
        // the hash tracks the overrides
        let base = RunConfig::from_str(REFERENCE_TOML, false, &[]).unwrap();
        let bumped = RunConfig::from_str(
            REFERENCE_TOML,
            false,
            &["waveguide.gamma_per_m=2.0".to_string()],
        )
        .unwrap();
        assert_ne!(base.canonical_hash(), bumped.canonical_hash());
        assert_eq!(base.canonical_hash(), base.canonical_hash());
        // malformed overrides are config errors
        assert!(RunConfig::from_str(REFERENCE_TOML, false, &["no_equals".to_string()]).is_err());
        assert!(RunConfig::from_str(
            REFERENCE_TOML,
            false,
            &["waveguide.length_mm.deeper=1".to_string()]
        )
        .is_err());
    }

    #[test]
    fn physical_validation_rejects_bad_values() {
        let cases = [
            "waveguide.length_mm=-1.0",
            "waveguide.pump_branch.group_velocity_over_c=1.5",
            "waveguide.pump_branch.n=0.5",
            "grid.points=1",
            "integrator.method=euler",
            "pump.fwhm_ps=0",
            "hom.tau_points=1",
        ];
        for case in cases {
            let err = RunConfig::from_str(REFERENCE_TOML, false, &[case.to_string()])
                .unwrap_err();
            assert!(matches!(err, Error::Config(_) | Error::InvalidInput(_)), "case {case}: {err:?}");
        }
    }

    #[test]
    fn sweep_section_accepts_exactly_one_form() {
        let list = format!("{REFERENCE_TOML}\n[sweep]\nlosses_db_cm = [0.0, 5.0]\n");
        assert!(RunConfig::from_str(&list, false, &[]).is_ok());
        let both = format!(
            "{REFERENCE_TOML}\n[sweep]\nlosses_db_cm = [0.0]\nalpha_bar_db_cm = [1.0]\nr_values = [0.0]\n"
        );
        assert!(RunConfig::from_str(&both, false, &[]).is_err());
        let neither = format!("{REFERENCE_TOML}\n[sweep]\n");
        assert!(RunConfig::from_str(&neither, false, &[]).is_err());
        let half_grid = format!("{REFERENCE_TOML}\n[sweep]\nalpha_bar_db_cm = [1.0]\n");
        assert!(RunConfig::from_str(&half_grid, false, &[]).is_err());
    }

    #[test]
    fn delay_and_time_axes_convert_to_seconds() {
        let cfg = RunConfig::from_str(REFERENCE_TOML, false, &[]).unwrap();
        let taus = cfg.hom_delays().unwrap();
        assert_eq!(taus.len(), 241);
        assert_relative_eq!(taus[0], -6.0e-12, max_relative = 1e-15);
        assert_relative_eq!(taus[240], 6.0e-12, max_relative = 1e-15);
        let times = cfg.temporal_times().unwrap();
        assert_eq!(times.len(), 241);
        assert_relative_eq!(times[0], -2.0e-12, max_relative = 1e-15);
    }
}
