//! `pdc-sim`: config-driven command-line front end for the down-conversion
//! simulator.
//!
//! Every command reads one configuration file (TOML or JSON), optionally
//! patched by repeatable `--set key.path=value` overrides, and writes its
//! artifacts into an output directory resolved as `--out`, else the
//! `PDC_SIM_OUT` environment variable, else the working directory. All
//! emitted files carry the canonical configuration hash so results can be
//! traced back to their exact inputs.
//!
//! Exit codes: 0 success · 1 I/O failure · 2 configuration error ·
//! 3 numerical failure · 4 loss inversion found no solution · 5 loss
//! inversion found several solutions.

use clap::{Parser, Subcommand};
use std::path::PathBuf;

use pdc_sim::config::RunConfig;
use pdc_sim::error::{Error, Result};
use pdc_sim::inversion::{
    build_forward_grid, calibrate_gamma, invert_losses, isolines, ForwardModel,
};
use pdc_sim::io::{
    self, atomic_write, diagnostics_csv, forward_grid_csv, hom_csv, jsi_csv, save_forward_grid,
    save_state, spectrum_csv, summary_from_state, temporal_csv, write_json, CsvMetadata, Summary,
};
use pdc_sim::measurement::{g2_both, hom_scan, temporal_intensity, Band};
use pdc_sim::propagation::{propagate, PropagationResult};
use pdc_sim::state::CorrelationState;

const OUT_ENV_VAR: &str = "PDC_SIM_OUT";

#[derive(Parser)]
#[command(
    name = "pdc-sim",
    version,
    about = "Gaussian-state simulation of pulsed type-II down-conversion in lossy waveguides"
)]
struct Cli {
    /// Configuration file (.toml or .json).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (default: $PDC_SIM_OUT, else the working directory).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Override a configuration key before validation; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate and emit spectra, JSI, temporal profiles, diagnostics,
    /// the final state, and the scalar summary.
    Simulate,
    /// Two-photon interference scan over the configured delay axis.
    Hom,
    /// Normalized second-order correlations of both bands.
    G2,
    /// Estimate internal losses from the measured g² pair in `[invert]`.
    Invert,
    /// Fix the coupling strength so the total photon number hits a target.
    Calibrate {
        /// Target photon number (overrides `[calibrate]` in the config).
        #[arg(long)]
        target: Option<f64>,
    },
    /// Run the parameter sweep configured in `[sweep]`.
    Sweep,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

/// Everything a command needs: the parsed config, its SI-unit setup, the
/// output directory, and the reproducibility header.
struct Context {
    config: RunConfig,
    out_dir: PathBuf,
    meta: CsvMetadata,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn build_context(cli: &Cli) -> Result<Context> {
    let Some(config_path) = &cli.config else {
        return Err(Error::Config(
            "a configuration file is required (--config PATH)".into(),
        ));
    };
    let config = RunConfig::load(config_path, &cli.sets)?;
    let out_dir = match (&cli.out, std::env::var_os(OUT_ENV_VAR)) {
        (Some(dir), _) => dir.clone(),
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&out_dir)?;
    if let Some(jobs) = cli.jobs {
        // ignore the error if a global pool already exists (e.g. tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let meta = CsvMetadata {
        config_hash: config.canonical_hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        grid_points: config.grid.points,
        gamma_per_m: config.waveguide.gamma_per_m,
        extra: vec![
            (
                "loss_signal_db_cm".into(),
                io::fmt17(config.waveguide.loss_signal_db_cm),
            ),
            (
                "loss_idler_db_cm".into(),
                io::fmt17(config.waveguide.loss_idler_db_cm),
            ),
            (
                "time_frame".into(),
                "co-moving with the pump pulse (t = 0 at the pump-peak arrival)".into(),
            ),
        ],
    };
    Ok(Context { config, out_dir, meta })
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = build_context(cli)?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx),
        Command::Hom => cmd_hom(&ctx),
        Command::G2 => cmd_g2(&ctx),
        Command::Invert => cmd_invert(&ctx),
        Command::Calibrate { target } => cmd_calibrate(&ctx, *target),
        Command::Sweep => cmd_sweep(&ctx),
    }
}

fn propagate_configured(config: &RunConfig) -> Result<PropagationResult> {
    let (wg, pulse, grid, integrator) = config.to_setup()?;
    propagate(&wg, &pulse, &grid, &integrator)
}

/// Scalar summary of a state; an unpopulated state (Γ = 0) reports zeros
/// instead of failing, since "no photons" is a valid simulation outcome.
fn summary_or_zeros(state: &CorrelationState) -> Result<Summary> {
    if state.photons_total() == 0.0 {
        return Ok(Summary {
            n_a: 0.0,
            n_b: 0.0,
            mu_a: 0.0,
            mu_b: 0.0,
            mu_ab: 0.0,
            g2_s_click: 0.0,
            g2_i_click: 0.0,
            g2_s_moment: 0.0,
            g2_i_moment: 0.0,
            visibility: None,
        });
    }
    summary_from_state(state)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let bytes = io::to_json_bytes(value)?;
    let text = String::from_utf8(bytes).expect("JSON is UTF-8");
    print!("{text}");
    Ok(())
}

fn cmd_simulate(ctx: &Context) -> Result<()> {
    let (wg, pulse, grid, integrator) = ctx.config.to_setup()?;
    let run = propagate(&wg, &pulse, &grid, &integrator)?;
    let state = &run.state;
    atomic_write(&ctx.path("spectrum.csv"), spectrum_csv(&ctx.meta, state).as_bytes())?;
    atomic_write(&ctx.path("jsi.csv"), jsi_csv(&ctx.meta, state).as_bytes())?;
    let profile = temporal_intensity(state, &wg, &pulse, &ctx.config.temporal_times()?)?;
    atomic_write(&ctx.path("temporal.csv"), temporal_csv(&ctx.meta, &profile).as_bytes())?;
    atomic_write(
        &ctx.path("diagnostics.csv"),
        diagnostics_csv(&ctx.meta, &run).as_bytes(),
    )?;
    save_state(&ctx.path("state.bin"), state)?;
    let summary = summary_or_zeros(state)?;
    write_json(&ctx.path("summary.json"), &summary)?;
    print_json(&summary)
}

#[derive(serde::Serialize)]
struct HomReport {
    baseline: f64,
    dip_minimum: f64,
    visibility: f64,
    dip_fwhm_ps: Option<f64>,
}

fn cmd_hom(ctx: &Context) -> Result<()> {
    let run = propagate_configured(&ctx.config)?;
    let scan = hom_scan(&run.state, &ctx.config.hom_delays()?)?;
    atomic_write(&ctx.path("hom.csv"), hom_csv(&ctx.meta, &scan).as_bytes())?;
    print_json(&HomReport {
        baseline: scan.baseline,
        dip_minimum: scan.dip_minimum,
        visibility: scan.visibility,
        dip_fwhm_ps: scan.dip_fwhm.map(|w| w * 1e12),
    })
}

#[derive(serde::Serialize)]
struct G2Report {
    g2_s_click: f64,
    g2_s_moment: f64,
    g2_i_click: f64,
    g2_i_moment: f64,
}

fn cmd_g2(ctx: &Context) -> Result<()> {
    let run = propagate_configured(&ctx.config)?;
    let s = g2_both(&run.state, Band::Signal)?;
    let i = g2_both(&run.state, Band::Idler)?;
    let report = G2Report {
        g2_s_click: s.click,
        g2_s_moment: s.moment,
        g2_i_click: i.click,
        g2_i_moment: i.moment,
    };
    write_json(&ctx.path("g2.json"), &report)?;
    print_json(&report)
}

fn cmd_invert(ctx: &Context) -> Result<()> {
    let Some(invert) = &ctx.config.invert else {
        return Err(Error::Config(
            "the invert command needs an [invert] section with the measured g² pair".into(),
        ));
    };
    let (wg, pulse, grid, integrator) = ctx.config.to_setup()?;
    let model = ForwardModel::new(wg, pulse, grid, integrator)?;
    let alpha_axis = invert.alpha_axis()?;
    let r_axis = invert.r_axis()?;

    // forward-map grids are expensive; cache them keyed by the model hash
    let hash = model.content_hash();
    let cache_name = format!(
        "forward_grid_{}_{}x{}.bin",
        &hash[..12],
        alpha_axis.len(),
        r_axis.len()
    );
    let cache_path = ctx.path(&cache_name);
    let map = match io::load_forward_grid(&cache_path, Some(&hash)) {
        Ok(map) if map.alpha_axis == alpha_axis && map.r_axis == r_axis => map,
        _ => {
            let map = build_forward_grid(&model, &alpha_axis, &r_axis)?;
            save_forward_grid(&cache_path, &map)?;
            map
        }
    };
    atomic_write(
        &ctx.path("forward_grid.csv"),
        forward_grid_csv(&ctx.meta, &map).as_bytes(),
    )?;
    if invert.export_isolines {
        let iso = isolines(&map, invert.g2_signal, invert.g2_idler);
        write_json(&ctx.path("isolines.json"), &iso)?;
    }
    let estimate = invert_losses(
        &model,
        &map,
        invert.g2_signal,
        invert.g2_idler,
        invert.r_n,
        &invert.settings(),
    )?;
    write_json(&ctx.path("estimate.json"), &estimate)?;
    print_json(&estimate)
}

#[derive(serde::Serialize)]
struct CalibrationReport {
    gamma_per_m: f64,
    target_photon_number: f64,
    achieved_photon_number: f64,
    relative_error: f64,
}

fn cmd_calibrate(ctx: &Context, target_flag: Option<f64>) -> Result<()> {
    let target = match (target_flag, &ctx.config.calibrate) {
        (Some(t), _) => t,
        (None, Some(section)) => section.target_photon_number,
        (None, None) => {
            return Err(Error::Config(
                "calibrate needs --target or a [calibrate] section".into(),
            ))
        }
    };
    let (wg, pulse, grid, integrator) = ctx.config.to_setup()?;
    let (gamma, run) = calibrate_gamma(&wg, &pulse, &grid, &integrator, target)?;
    let achieved = run.state.photons_total();
    let mut updated = ctx.config.clone();
    updated.waveguide.gamma_per_m = gamma;
    let toml_text = toml::to_string_pretty(&updated)
        .map_err(|e| Error::Numerics(format!("could not serialize updated config: {e}")))?;
    atomic_write(&ctx.path("calibrated.toml"), toml_text.as_bytes())?;
    print_json(&CalibrationReport {
        gamma_per_m: gamma,
        target_photon_number: target,
        achieved_photon_number: achieved,
        relative_error: if target > 0.0 { achieved / target - 1.0 } else { 0.0 },
    })
}

/// File-name fragment for a parameter value: `Display` for `f64` prints
/// the shortest digits that round-trip, so names are deterministic.
fn value_tag(x: f64) -> String {
    format!("{x}").replace('-', "m").replace('.', "p")
}

fn cmd_sweep(ctx: &Context) -> Result<()> {
    let Some(sweep) = &ctx.config.sweep else {
        return Err(Error::Config("the sweep command needs a [sweep] section".into()));
    };
    if let Some(losses) = &sweep.losses_db_cm {
        return sweep_equal_losses(ctx, losses);
    }
    let (Some(alpha), Some(r)) = (&sweep.alpha_bar_db_cm, &sweep.r_values) else {
        return Err(Error::Config(
            "sweep needs losses_db_cm or the alpha_bar_db_cm + r_values pair".into(),
        ));
    };
    sweep_grid(ctx, alpha, r)
}

fn sweep_equal_losses(ctx: &Context, losses: &[f64]) -> Result<()> {
    use rayon::prelude::*;
    let runs: Vec<(f64, Summary)> = losses
        .par_iter()
        .map(|&alpha_db| -> Result<(f64, Summary)> {
            let mut config = ctx.config.clone();
            config.waveguide.loss_signal_db_cm = alpha_db;
            config.waveguide.loss_idler_db_cm = alpha_db;
            let run = propagate_configured(&config)?;
            let summary = summary_or_zeros(&run.state)?;
            let sub = ctx.out_dir.join(format!("alpha_{}", value_tag(alpha_db)));
            std::fs::create_dir_all(&sub)?;
            let meta = CsvMetadata {
                gamma_per_m: config.waveguide.gamma_per_m,
                extra: vec![
                    ("loss_signal_db_cm".into(), io::fmt17(alpha_db)),
                    ("loss_idler_db_cm".into(), io::fmt17(alpha_db)),
                ],
                ..ctx.meta.clone()
            };
            atomic_write(
                &sub.join("spectrum.csv"),
                spectrum_csv(&meta, &run.state).as_bytes(),
            )?;
            write_json(&sub.join("summary.json"), &summary)?;
            Ok((alpha_db, summary))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = ctx.meta.header();
    csv.push_str(
        "alpha_db_cm,N_a,N_b,mu_a,mu_b,mu_ab,g2_s_click,g2_i_click,g2_s_moment,g2_i_moment\n",
    );
    for (alpha_db, s) in &runs {
        use std::fmt::Write as _;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            io::fmt17(*alpha_db),
            io::fmt17(s.n_a),
            io::fmt17(s.n_b),
            io::fmt17(s.mu_a),
            io::fmt17(s.mu_b),
            io::fmt17(s.mu_ab),
            io::fmt17(s.g2_s_click),
            io::fmt17(s.g2_i_click),
            io::fmt17(s.g2_s_moment),
            io::fmt17(s.g2_i_moment)
        );
    }
    atomic_write(&ctx.path("sweep_summary.csv"), csv.as_bytes())?;
    println!(
        "{{\"runs\": {}, \"output\": {:?}}}",
        runs.len(),
        ctx.path("sweep_summary.csv")
    );
    Ok(())
}

fn sweep_grid(ctx: &Context, alpha_axis: &[f64], r_axis: &[f64]) -> Result<()> {
    let (wg, pulse, grid, integrator) = ctx.config.to_setup()?;
    let model = ForwardModel::new(wg, pulse, grid, integrator)?;
    let map = build_forward_grid(&model, alpha_axis, r_axis)?;
    save_forward_grid(&ctx.path("forward_grid.bin"), &map)?;
    atomic_write(
        &ctx.path("forward_grid.csv"),
        forward_grid_csv(&ctx.meta, &map).as_bytes(),
    )?;
    println!(
        "{{\"cells\": {}, \"failures\": {}}}",
        alpha_axis.len() * r_axis.len(),
        map.failures.len()
    );
    Ok(())
}
