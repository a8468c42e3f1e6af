//! File formats: binary containers for states and forward-map grids,
//! CSV emitters with reproducibility headers, and the JSON run summary.
//!
//! All writers go through [`atomic_write`] (write to a temporary file in
//! the destination directory, then rename), so readers never observe a
//! half-written artifact. All floating-point text output uses 17
//! significant digits — enough to reproduce every `f64` bit-exactly.

use ndarray::Array2;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::inversion::{ForwardMapGrid, GridFailure, GridMetadata};
use crate::measurement::{
    g2_both, mode_numbers_summary, spectrum, Band, HomScan, TemporalProfile,
};
use crate::propagation::PropagationResult;
use crate::setup::FrequencyGrid;
use crate::state::CorrelationState;
use crate::units::angular_to_thz;
use crate::C64;

/// Fixed-width float formatting: 17 significant digits, scientific
/// notation, enough to round-trip any `f64` bit-exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `bytes` to `path` atomically: a unique temporary file in the same
/// directory receives the data, then replaces `path` by rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serialize a value as pretty JSON with a trailing newline. Key order is
/// the struct declaration order — stable across runs and platforms.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerics(format!("JSON serialization failed: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Write a value as pretty JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, &to_json_bytes(value)?)
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Reproducibility header attached to every CSV artifact.
#[derive(Debug, Clone)]
pub struct CsvMetadata {
    /// Canonical hash of the run configuration.
    pub config_hash: String,
    /// Crate version that produced the file.
    pub code_version: String,
    /// Frequency bins per band.
    pub grid_points: usize,
    /// Coupling strength Γ (1/m).
    pub gamma_per_m: f64,
    /// Additional `key = value` lines (losses, frame notes, scalars).
    pub extra: Vec<(String, String)>,
}

impl CsvMetadata {
    /// The '#'-prefixed header block shared by every CSV artifact.
    pub fn header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# config_hash = {}", self.config_hash);
        let _ = writeln!(out, "# code_version = {}", self.code_version);
        let _ = writeln!(out, "# grid_points = {}", self.grid_points);
        let _ = writeln!(out, "# gamma_per_m = {}", fmt17(self.gamma_per_m));
        for (key, value) in &self.extra {
            let _ = writeln!(out, "# {key} = {value}");
        }
        out
    }

    pub fn with_extra(mut self, key: &str, value: String) -> Self {
        self.extra.push((key.to_string(), value));
        self
    }
}

fn detuning_thz(grid: &FrequencyGrid, m: usize) -> f64 {
    angular_to_thz(grid.omega(m) - grid.omega_center())
}

/// Marginal spectra: `detuning_thz, n_signal, n_idler` per grid bin.
pub fn spectrum_csv(meta: &CsvMetadata, state: &CorrelationState) -> String {
    let grid = state.grid();
    let n_s = spectrum(state, Band::Signal);
    let n_i = spectrum(state, Band::Idler);
    let mut out = meta.header();
    out.push_str("detuning_thz,n_signal,n_idler\n");
    for m in 0..grid.n_points() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt17(detuning_thz(grid, m)),
            fmt17(n_s[m]),
            fmt17(n_i[m])
        );
    }
    out
}

/// Dense joint spectral intensity. The first row after the header carries
/// the idler detuning axis; each data row starts with the signal detuning.
pub fn jsi_csv(meta: &CsvMetadata, state: &CorrelationState) -> String {
    let grid = state.grid();
    let n = grid.n_points();
    let matrix = crate::measurement::jsi(state);
    let mut out = meta.header();
    out.push_str("signal_detuning_thz\\idler_detuning_thz");
    for b in 0..n {
        let _ = write!(out, ",{}", fmt17(detuning_thz(grid, b)));
    }
    out.push('\n');
    for a in 0..n {
        let _ = write!(out, "{}", fmt17(detuning_thz(grid, a)));
        for b in 0..n {
            let _ = write!(out, ",{}", fmt17(matrix[[a, b]]));
        }
        out.push('\n');
    }
    out
}

/// Temporal envelopes: `t_ps, i_signal, i_idler, i_pump`. Signal and idler
/// are normalized to the idler peak (the common arbitrary flux scale
/// cancels); the pump envelope has unit peak by construction.
pub fn temporal_csv(meta: &CsvMetadata, profile: &TemporalProfile) -> String {
    let idler_peak = profile
        .idler
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let scale = if idler_peak > 0.0 { 1.0 / idler_peak } else { 1.0 };
    let mut out = meta
        .clone()
        .with_extra("normalization", "idler_peak".to_string())
        .header();
    out.push_str("t_ps,i_signal,i_idler,i_pump\n");
    for k in 0..profile.times.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(profile.times[k] * 1e12),
            fmt17(profile.signal[k] * scale),
            fmt17(profile.idler[k] * scale),
            fmt17(profile.pump[k])
        );
    }
    out
}

/// Two-photon interference scan: `tau_ps, p_coincidence, p_single_c,
/// p_single_d`, with the dip parameters in the header.
pub fn hom_csv(meta: &CsvMetadata, scan: &HomScan) -> String {
    let mut meta = meta
        .clone()
        .with_extra("baseline", fmt17(scan.baseline))
        .with_extra("dip_minimum", fmt17(scan.dip_minimum))
        .with_extra("visibility", fmt17(scan.visibility));
    meta = match scan.dip_fwhm {
        Some(w) => meta.with_extra("dip_fwhm_ps", fmt17(w * 1e12)),
        None => meta.with_extra("dip_fwhm_ps", "unresolved".to_string()),
    };
    let mut out = meta.header();
    out.push_str("tau_ps,p_coincidence,p_single_c,p_single_d\n");
    for k in 0..scan.delays.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt17(scan.delays[k] * 1e12),
            fmt17(scan.coincidences[k]),
            fmt17(scan.singles_c[k]),
            fmt17(scan.singles_d[k])
        );
    }
    out
}

/// Along-device diagnostics: `z_m, n_signal, n_idler` per recorded step,
/// with the worst Hermitian-symmetry drift in the header.
pub fn diagnostics_csv(meta: &CsvMetadata, run: &PropagationResult) -> String {
    let mut out = meta
        .clone()
        .with_extra("max_hermiticity_drift", fmt17(run.max_hermiticity_drift))
        .with_extra("steps_taken", run.steps_taken.to_string())
        .header();
    out.push_str("z_m,n_signal,n_idler\n");
    for sample in &run.photon_record {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt17(sample.z),
            fmt17(sample.n_signal),
            fmt17(sample.n_idler)
        );
    }
    out
}

/// Forward-map grid as a long-format table: `alpha_bar_db_cm, r,
/// g2_signal, g2_idler, imbalance` (failed cells emit `nan`).
pub fn forward_grid_csv(meta: &CsvMetadata, map: &ForwardMapGrid) -> String {
    let mut out = meta.header();
    out.push_str("alpha_bar_db_cm,r,g2_signal,g2_idler,imbalance\n");
    for (i, &alpha) in map.alpha_axis.iter().enumerate() {
        for (j, &r) in map.r_axis.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt17(alpha),
                fmt17(r),
                fmt17(map.g2_signal[[i, j]]),
                fmt17(map.g2_idler[[i, j]]),
                fmt17(map.imbalance[[i, j]])
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON summary
// ---------------------------------------------------------------------------

/// The scalar run summary printed by the simulation commands. Field order
/// is the emission order.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    #[serde(rename = "N_a")]
    pub n_a: f64,
    #[serde(rename = "N_b")]
    pub n_b: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_ab: f64,
    pub g2_s_click: f64,
    pub g2_i_click: f64,
    pub g2_s_moment: f64,
    pub g2_i_moment: f64,
    pub visibility: Option<f64>,
}

/// Assemble the summary scalars from a propagated state. `visibility` stays
/// empty unless a HOM scan was part of the run.
pub fn summary_from_state(state: &CorrelationState) -> Result<Summary> {
    let (mu_a, mu_b, mu_ab) = mode_numbers_summary(state)?;
    let g2_s = g2_both(state, Band::Signal)?;
    let g2_i = g2_both(state, Band::Idler)?;
    Ok(Summary {
        n_a: state.photons_signal(),
        n_b: state.photons_idler(),
        mu_a,
        mu_b,
        mu_ab,
        g2_s_click: g2_s.click,
        g2_i_click: g2_i.click,
        g2_s_moment: g2_s.moment,
        g2_i_moment: g2_i.moment,
        visibility: None,
    })
}

// ---------------------------------------------------------------------------
// Binary containers
// ---------------------------------------------------------------------------

const STATE_MAGIC: &[u8; 8] = b"PDCCORR1";
const GRID_MAGIC: &[u8; 8] = b"PDCGRID1";
const CONTAINER_VERSION: u32 = 1;

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u32(&mut self, x: u32) {
        self.bytes(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.bytes(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.bytes(&x.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
    fn complex_matrix(&mut self, m: &Array2<C64>) {
        for value in m.iter() {
            self.f64(value.re);
            self.f64(value.im);
        }
    }
}

struct ByteReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::InvalidInput(
                "binary container is truncated".into(),
            ));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::InvalidInput("binary container holds invalid UTF-8".into()))
    }
    fn complex_matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<C64>> {
        let mut m = Array2::<C64>::zeros((rows, cols));
        for value in m.iter_mut() {
            let re = self.f64()?;
            let im = self.f64()?;
            *value = C64::new(re, im);
        }
        Ok(m)
    }
    fn done(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(Error::InvalidInput(
                "binary container has trailing bytes".into(),
            ));
        }
        Ok(())
    }
}

fn check_magic(reader: &mut ByteReader<'_>, expected: &[u8; 8], what: &str) -> Result<()> {
    let magic = reader.take(8)?;
    if magic != expected {
        return Err(Error::InvalidInput(format!(
            "not a {what} container (bad magic bytes)"
        )));
    }
    let version = reader.u32()?;
    if version != CONTAINER_VERSION {
        return Err(Error::InvalidInput(format!(
            "unsupported {what} container version {version}"
        )));
    }
    Ok(())
}

/// Serialize a correlation state: header (grid + position), then the two
/// moment matrices row-major as little-endian `(re, im)` doubles.
pub fn state_to_bytes(state: &CorrelationState) -> Vec<u8> {
    let grid = state.grid();
    let mut w = ByteWriter::new();
    w.bytes(STATE_MAGIC);
    w.u32(CONTAINER_VERSION);
    w.u64(grid.n_points() as u64);
    w.f64(state.z_position());
    w.f64(grid.omega_0());
    w.f64(grid.delta_omega());
    w.f64(grid.omega_center());
    w.complex_matrix(state.d_matrix());
    w.complex_matrix(state.c_matrix());
    w.buf
}

/// Inverse of [`state_to_bytes`]; every stored number is reproduced
/// bit-exactly.
pub fn state_from_bytes(bytes: &[u8]) -> Result<CorrelationState> {
    let mut r = ByteReader::new(bytes);
    check_magic(&mut r, STATE_MAGIC, "correlation-state")?;
    let n = r.u64()? as usize;
    let z = r.f64()?;
    let omega_0 = r.f64()?;
    let delta_omega = r.f64()?;
    let omega_center = r.f64()?;
    let grid = FrequencyGrid::from_raw(omega_0, delta_omega, n, omega_center)?;
    let d = r.complex_matrix(2 * n, 2 * n)?;
    let c = r.complex_matrix(2 * n, 2 * n)?;
    r.done()?;
    CorrelationState::from_full_matrices(grid, z, d, c)
}

/// Save a correlation state atomically.
pub fn save_state(path: &Path, state: &CorrelationState) -> Result<()> {
    atomic_write(path, &state_to_bytes(state))
}

/// Load a correlation state saved by [`save_state`].
pub fn load_state(path: &Path) -> Result<CorrelationState> {
    state_from_bytes(&std::fs::read(path)?)
}

fn real_matrix_to(w: &mut ByteWriter, m: &Array2<f64>) {
    for value in m.iter() {
        w.f64(*value);
    }
}

fn real_matrix_from(r: &mut ByteReader<'_>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut m = Array2::<f64>::zeros((rows, cols));
    for value in m.iter_mut() {
        *value = r.f64()?;
    }
    Ok(m)
}

/// Serialize a forward-map grid (cache format; NaN cells preserved).
pub fn forward_grid_to_bytes(map: &ForwardMapGrid) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(GRID_MAGIC);
    w.u32(CONTAINER_VERSION);
    w.str(&map.metadata.config_hash);
    w.f64(map.metadata.gamma);
    w.u64(map.metadata.grid_points as u64);
    w.u64(map.metadata.step_count as u64);
    w.u64(map.alpha_axis.len() as u64);
    w.u64(map.r_axis.len() as u64);
    for &a in &map.alpha_axis {
        w.f64(a);
    }
    for &r in &map.r_axis {
        w.f64(r);
    }
    real_matrix_to(&mut w, &map.g2_signal);
    real_matrix_to(&mut w, &map.g2_idler);
    real_matrix_to(&mut w, &map.imbalance);
    w.u64(map.failures.len() as u64);
    for failure in &map.failures {
        w.u64(failure.alpha_index as u64);
        w.u64(failure.r_index as u64);
        w.str(&failure.message);
    }
    w.buf
}

/// Inverse of [`forward_grid_to_bytes`].
pub fn forward_grid_from_bytes(bytes: &[u8]) -> Result<ForwardMapGrid> {
    let mut r = ByteReader::new(bytes);
    check_magic(&mut r, GRID_MAGIC, "forward-map grid")?;
    let config_hash = r.str()?;
    let gamma = r.f64()?;
    let grid_points = r.u64()? as usize;
    let step_count = r.u64()? as usize;
    let na = r.u64()? as usize;
    let nr = r.u64()? as usize;
    let mut alpha_axis = Vec::with_capacity(na);
    for _ in 0..na {
        alpha_axis.push(r.f64()?);
    }
    let mut r_axis = Vec::with_capacity(nr);
    for _ in 0..nr {
        r_axis.push(r.f64()?);
    }
    let g2_signal = real_matrix_from(&mut r, na, nr)?;
    let g2_idler = real_matrix_from(&mut r, na, nr)?;
    let imbalance = real_matrix_from(&mut r, na, nr)?;
    let n_failures = r.u64()? as usize;
    let mut failures = Vec::with_capacity(n_failures);
    for _ in 0..n_failures {
        failures.push(GridFailure {
            alpha_index: r.u64()? as usize,
            r_index: r.u64()? as usize,
            message: r.str()?,
        });
    }
    r.done()?;
    Ok(ForwardMapGrid {
        alpha_axis,
        r_axis,
        g2_signal,
        g2_idler,
        imbalance,
        failures,
        metadata: GridMetadata { config_hash, gamma, grid_points, step_count },
    })
}

/// Save a forward-map grid cache atomically.
pub fn save_forward_grid(path: &Path, map: &ForwardMapGrid) -> Result<()> {
    atomic_write(path, &forward_grid_to_bytes(map))
}

/// Load a forward-map grid cache; `expected_hash` (if given) must match the
/// stored generating-model hash, otherwise the cache is rejected as stale.
pub fn load_forward_grid(path: &Path, expected_hash: Option<&str>) -> Result<ForwardMapGrid> {
    let map = forward_grid_from_bytes(&std::fs::read(path)?)?;
    if let Some(expected) = expected_hash {
        if map.metadata.config_hash != expected {
            return Err(Error::InvalidInput(format!(
                "forward-grid cache at {} was built from a different configuration \
                 (stored hash {}…, expected {}…)",
                path.display(),
                &map.metadata.config_hash[..12.min(map.metadata.config_hash.len())],
                &expected[..12.min(expected.len())]
            )));
        }
    }
    Ok(map)
}
