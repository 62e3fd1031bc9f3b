//! End-to-end experiment: kernels, Penrose analysis, Volterra and oracle runs, theorem
//! check and decay fits, persisted as CSV and JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{render_config, ExperimentConfig, OutputFormat, PerturbedSpecies};
use super::csv;
use crate::analysis::{
    compare_trajectories, dominant_root, fit_exponential_envelope, timed, DecayFit, DispersionRoot, Norm, RootSearch,
};
use crate::equilibria::{EquilibriumProfile, SpeciesParams};
use crate::error::{Error, Result};
use crate::kernel::{default_fit_horizon, fit_decay_bound, DecayBound, MemoryKernel, ModeKernel};
use crate::oracle::{evolve, EtaGrid, FieldSwitch, OracleModel, OracleTrajectory, PhaseSpacePerturbation};
use crate::penrose::{
    default_omega_range, penrose_criterion, refined_margin_scan, MarginGrid, MarginScan, PenroseReport,
    KERNEL_FIT_SAMPLES,
};
use crate::perturbation::SeparablePerturbation;
use crate::potential::{mode_energy, InteractionPotential};
use crate::volterra::{
    fit_forcing_bounds, make_forcing, solve_mode, theorem_bound, ForcingBounds, ModeSeries, TheoremCheck,
    TheoremConstants,
};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "LANDAU_OUTPUT_DIR";

/// Output directory: command-line value, then the environment, then the configuration.
pub fn resolve_output_dir(cfg: &ExperimentConfig, cli: Option<&Path>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output_directory.clone(),
    }
}

/// Objects shared by every stage of a run.
pub struct Model {
    pub profile: EquilibriumProfile,
    pub potential: InteractionPotential,
    pub species: SpeciesParams,
    pub h_e: Arc<SeparablePerturbation>,
    pub h_i: Arc<SeparablePerturbation>,
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<Model> {
    let profile = cfg.equilibrium.build()?;
    let potential = cfg.interaction()?;
    let species = cfg.species()?;
    let shape = cfg.perturbation_profile.build()?;
    let pert = SeparablePerturbation::cosine(cfg.amplitude, &cfg.perturbation_modes, &shape)?;
    let zero = SeparablePerturbation::zero();
    let (h_e, h_i) = match cfg.perturbed_species {
        PerturbedSpecies::Electrons => (pert, zero),
        PerturbedSpecies::Ions => (zero, pert),
        PerturbedSpecies::Both => (pert.clone(), pert),
    };
    Ok(Model {
        profile,
        potential,
        species,
        h_e: Arc::new(h_e),
        h_i: Arc::new(h_i),
    })
}

/// Combined kernel of mode k and its fitted decay bound.
pub fn mode_kernel(model: &Model, k: i64) -> Result<(ModeKernel, DecayBound)> {
    let kern = ModeKernel::combined(k, Arc::new(model.profile.clone()), &model.potential, &model.species)?;
    let bound = fit_decay_bound(
        &kern,
        default_fit_horizon(&model.profile, kern.wavenumber()),
        KERNEL_FIT_SAMPLES,
    )?;
    Ok((kern, bound))
}

/// Penrose criterion and refined margin scan for mode k.
pub fn penrose_analysis(
    cfg: &ExperimentConfig,
    model: &Model,
    k: i64,
) -> Result<(PenroseReport, MarginScan, DecayBound)> {
    let mut report = penrose_criterion(k, &model.profile, &model.potential, &model.species)?;
    let (kern, bound) = mode_kernel(model, k)?;
    let (om_min, om_max) = default_omega_range(&model.profile, &model.potential, k);
    let grid = MarginGrid {
        lambda: cfg.lambda,
        re_steps: cfg.re_steps,
        om_min,
        om_max,
        om_steps: cfg.om_steps,
    };
    let scan = refined_margin_scan(&kern, &bound, model.species.two_species_factor(), grid, cfg.refine)?;
    report.kappa = Some(scan.kappa);
    report.lambda = Some(cfg.lambda);
    Ok((report, scan, bound))
}

pub fn dispersion_for_mode(model: &Model, k: i64) -> Result<DispersionRoot> {
    let (kern, bound) = mode_kernel(model, k)?;
    let search = RootSearch::default_for(&model.profile, kern.wavenumber(), &bound);
    dominant_root(&kern, &bound, model.species.two_species_factor(), &search)
}

/// Theorem check outcome of one mode.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TheoremOutcome {
    Checked { check: TheoremCheck },
    Skipped { reason: String },
}

#[derive(Debug, Clone, Serialize)]
struct MarginSummary {
    kappa: f64,
    argmin: Complex64,
    factor: f64,
    grid: MarginGrid,
    laplace_t_max: f64,
    max_tail_bound: f64,
}

impl From<&MarginScan> for MarginSummary {
    fn from(s: &MarginScan) -> Self {
        Self {
            kappa: s.kappa,
            argmin: s.argmin,
            factor: s.factor,
            grid: s.grid,
            laplace_t_max: s.laplace_t_max,
            max_tail_bound: s.max_tail_bound,
        }
    }
}

struct ModeOutcome {
    k: i64,
    penrose: PenroseReport,
    margin: MarginSummary,
    kernel_bound: DecayBound,
    forcing_bounds: ForcingBounds,
    theorem: TheoremOutcome,
    series: ModeSeries,
    fit: std::result::Result<DecayFit, String>,
    energy_fit: std::result::Result<DecayFit, String>,
    dispersion: std::result::Result<DispersionRoot, String>,
}

fn stage<T>(name: &str, k: Option<i64>, r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|error| Failure {
        stage: name.to_string(),
        mode: k,
        error,
    })
}

struct Failure {
    stage: String,
    mode: Option<i64>,
    error: Error,
}

fn run_mode(cfg: &ExperimentConfig, model: &Model, k: i64) -> std::result::Result<ModeOutcome, Failure> {
    let (penrose, scan, kernel_bound) = stage("penrose", Some(k), penrose_analysis(cfg, model, k))?;
    let (kern, _) = stage("kernel", Some(k), mode_kernel(model, k))?;
    let forcing = stage(
        "forcing",
        Some(k),
        make_forcing(k, model.h_e.clone(), model.h_i.clone(), cfg.box_length),
    )?;
    let forcing_bounds = stage(
        "forcing",
        Some(k),
        fit_forcing_bounds(&forcing, &model.species, cfg.horizon),
    )?;
    let series = stage(
        "volterra",
        Some(k),
        solve_mode(k, &forcing, &kern, &model.species, cfg.horizon, cfg.dt),
    )?;
    let theorem = if !cfg.theorem {
        TheoremOutcome::Skipped {
            reason: "disabled".into(),
        }
    } else if !penrose.stable || !(scan.kappa > 0.0) {
        TheoremOutcome::Skipped {
            reason: "criterion failed".into(),
        }
    } else {
        let consts = match cfg.lambda_prime {
            Some(lp) => TheoremConstants::new(&kernel_bound, &forcing_bounds, scan.kappa, cfg.lambda, lp),
            None => TheoremConstants::with_default_rate(&kernel_bound, &forcing_bounds, scan.kappa, cfg.lambda),
        };
        match consts.and_then(|c| theorem_bound(&series, &c, &model.species)) {
            Ok(check) => TheoremOutcome::Checked { check },
            Err(e @ Error::Precondition(_)) => TheoremOutcome::Skipped { reason: e.to_string() },
            Err(e) => {
                return Err(Failure {
                    stage: "theorem".into(),
                    mode: Some(k),
                    error: e,
                })
            }
        }
    };
    let window = (cfg.fit_skip * cfg.horizon, series.time(series.len() - 1));
    let fit = fit_exponential_envelope(&timed(0.0, series.dt, &series.difference()), window).map_err(|e| e.to_string());
    let energy = mode_energies(&series, &model.potential, model.species.e_charge, k);
    let energy = stage("energy", Some(k), energy)?;
    let energy_fit = fit_exponential_envelope(&timed(0.0, series.dt, &energy), window).map_err(|e| e.to_string());
    let dispersion = dispersion_for_mode(model, k).map_err(|e| e.to_string());
    Ok(ModeOutcome {
        k,
        penrose,
        margin: MarginSummary::from(&scan),
        kernel_bound,
        forcing_bounds,
        theorem,
        series,
        fit,
        energy_fit,
        dispersion,
    })
}

fn mode_energies(series: &ModeSeries, w: &InteractionPotential, e: f64, k: i64) -> Result<Vec<Complex64>> {
    series
        .difference()
        .iter()
        .map(|&d| Ok(Complex64::new(mode_energy(d, k, w, e)?, 0.0)))
        .collect()
}

fn volterra_rows(series: &ModeSeries, model: &Model) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let header = [
        "t",
        "re_phi_e",
        "im_phi_e",
        "re_phi_i",
        "im_phi_i",
        "abs_diff",
        "re_weighted_sum",
        "im_weighted_sum",
        "energy",
    ]
    .map(String::from)
    .to_vec();
    let r = model.species.mass_ratio();
    let energy = mode_energies(series, &model.potential, model.species.e_charge, series.k)?;
    let rows = (0..series.len())
        .map(|n| {
            let (e, i) = (series.phi_e[n], series.phi_i[n]);
            let s = e * r + i;
            vec![
                series.time(n),
                e.re,
                e.im,
                i.re,
                i.im,
                (i - e).norm(),
                s.re,
                s.im,
                energy[n].re,
            ]
        })
        .collect();
    Ok((header, rows))
}

fn oracle_rows(traj: &OracleTrajectory) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut header = vec!["t".to_string()];
    for k in &traj.k_modes {
        header.push(format!("abs_rho_e_k{k}"));
        header.push(format!("abs_rho_i_k{k}"));
        header.push(format!("abs_diff_k{k}"));
    }
    header.push("energy".into());
    let rows = (0..traj.len())
        .map(|n| {
            let mut row = vec![traj.time(n)];
            for r in 0..traj.k_modes.len() {
                let (e, i) = (traj.rho_e[r][n], traj.rho_i[r][n]);
                row.extend([e.norm(), i.norm(), (i - e).norm()]);
            }
            row.push(traj.electric_energy[n]);
            row
        })
        .collect();
    (header, rows)
}

pub fn run_oracle(cfg: &ExperimentConfig, model: &Model) -> Result<OracleTrajectory> {
    let grid = EtaGrid::new(cfg.eta_max, cfg.d_eta)?;
    let state =
        PhaseSpacePerturbation::from_spectra(grid, cfg.box_length, &cfg.modes, model.h_e.as_ref(), model.h_i.as_ref())?;
    let om = OracleModel::global(&model.profile, &model.potential, &model.species);
    Ok(evolve(&state, &om, cfg.horizon, cfg.dt, FieldSwitch::On)?.0)
}

/// Summary of a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    pub stable: bool,
    /// `None` when no mode reached the theorem check.
    pub bound_holds: Option<bool>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
        csv::write(&self.dir.join(name), header, rows)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn manifest(cfg: &ExperimentConfig, files: &[String], summary: Value, failure: Option<&Failure>) -> Value {
    json!({
        "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "status": if failure.is_some() { "failed" } else { "ok" },
        "failure": failure.map(|f| json!({ "stage": f.stage, "mode": f.mode, "message": f.error.to_string() })),
        "config": cfg,
        "resolved_config": render_config(cfg),
        "defaults_filled": cfg.defaults_filled,
        "files": files,
        "summary": summary,
    })
}

fn err_value<T: Serialize>(r: &std::result::Result<T, String>) -> Value {
    match r {
        Ok(v) => json!(v),
        Err(e) => json!({ "error": e }),
    }
}

/// Runs every stage and writes the outputs to `out_dir`.
///
/// On failure the files written so far stay in place and the manifest records the stage
/// that failed.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    match run_stages(cfg, &mut w) {
        Ok((summary, report)) => {
            let m = manifest(cfg, &w.files, summary, None);
            w.json("manifest.json", &m)?;
            Ok(ExperimentReport {
                output_dir: out_dir.to_path_buf(),
                files: w.files,
                ..report
            })
        }
        Err(f) => {
            let m = manifest(cfg, &w.files, Value::Null, Some(&f));
            w.json("manifest.json", &m)?;
            Err(f.error)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, w: &mut Writer) -> std::result::Result<(Value, ExperimentReport), Failure> {
    let model = stage("model", None, build_model(cfg))?;
    let outcomes: Vec<_> = cfg.modes.par_iter().map(|&k| run_mode(cfg, &model, k)).collect();
    let outcomes = outcomes.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    let csv_on = cfg.writes(OutputFormat::Csv);
    let json_on = cfg.writes(OutputFormat::Json);
    let io = |r: Result<()>| stage("output", None, r);

    if csv_on {
        for o in &outcomes {
            let (h, rows) = stage("output", Some(o.k), volterra_rows(&o.series, &model))?;
            io(w.csv(&format!("volterra_k{}.csv", o.k), &h, &rows))?;
        }
    }
    let oracle = if cfg.oracle {
        let traj = stage("oracle", None, run_oracle(cfg, &model))?;
        if csv_on {
            let (h, rows) = oracle_rows(&traj);
            io(w.csv("oracle.csv", &h, &rows))?;
        }
        Some(traj)
    } else {
        None
    };

    let mut oracle_stats = BTreeMap::new();
    if let Some(traj) = &oracle {
        for o in &outcomes {
            let s = stage("oracle", Some(o.k), traj.mode_series(o.k))?;
            let sup = stage("oracle", Some(o.k), compare_trajectories(&o.series, &s, Norm::Sup))?;
            let window = (cfg.fit_skip * cfg.horizon, s.time(s.len() - 1));
            let fit = fit_exponential_envelope(&timed(0.0, s.dt, &s.difference()), window).map_err(|e| e.to_string());
            oracle_stats.insert(o.k, (sup, fit));
        }
    }

    let stable = outcomes.iter().all(|o| o.penrose.stable);
    let checks: Vec<bool> = outcomes
        .iter()
        .filter_map(|o| match &o.theorem {
            TheoremOutcome::Checked { check } => Some(check.holds()),
            TheoremOutcome::Skipped { .. } => None,
        })
        .collect();
    let bound_holds = if checks.is_empty() {
        None
    } else {
        Some(checks.iter().all(|&h| h))
    };

    if json_on {
        let penrose: Vec<&PenroseReport> = outcomes.iter().map(|o| &o.penrose).collect();
        io(w.json("penrose.json", &json!(penrose)))?;
        let theorem: Vec<Value> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "k": o.k,
                    "kernel_bound": o.kernel_bound,
                    "margin": o.margin,
                    "forcing_bounds": o.forcing_bounds,
                    "theorem": o.theorem,
                })
            })
            .collect();
        io(w.json("theorem.json", &json!(theorem)))?;
        let fits: Vec<Value> = outcomes
            .iter()
            .map(|o| {
                let (sup, ofit) = match oracle_stats.get(&o.k) {
                    Some((s, f)) => (json!(s), err_value(f)),
                    None => (Value::Null, Value::Null),
                };
                let predicted = o.dispersion.as_ref().map(|r| r.decay_rate).ok();
                json!({
                    "k": o.k,
                    "volterra": err_value(&o.fit),
                    "electric_energy": err_value(&o.energy_fit),
                    "oracle": ofit,
                    "oracle_sup_difference": sup,
                    "dispersion_root": err_value(&o.dispersion),
                    "predicted_rate": predicted,
                })
            })
            .collect();
        io(w.json("fit.json", &json!(fits)))?;
    }

    let summary = json!({
        "modes": cfg.modes,
        "stable": stable,
        "bound_holds": bound_holds,
        "kappa": outcomes.iter().map(|o| o.margin.kappa).collect::<Vec<_>>(),
        "fitted_rates": outcomes.iter().map(|o| o.fit.as_ref().map(|f| f.rate).ok()).collect::<Vec<_>>(),
    });
    let report = ExperimentReport {
        output_dir: w.dir.to_path_buf(),
        files: Vec::new(),
        stable,
        bound_holds,
    };
    Ok((summary, report))
}

/// Kernel samples (lag, Re K, Im K, |K|) of mode k with the run's step.
pub fn kernel_table(cfg: &ExperimentConfig, k: i64) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let model = build_model(cfg)?;
    let kern = ModeKernel::combined(k, Arc::new(model.profile.clone()), &model.potential, &model.species)?;
    let horizon = default_fit_horizon(&model.profile, kern.wavenumber()).min(cfg.horizon);
    let n = (horizon / cfg.dt).ceil() as usize;
    let header = ["lag", "re_kernel", "im_kernel", "abs_kernel"]
        .map(String::from)
        .to_vec();
    let rows = (0..=n)
        .map(|j| {
            let s = j as f64 * cfg.dt;
            kern.eval(s).map(|z| vec![s, z.re, z.im, z.norm()])
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}
