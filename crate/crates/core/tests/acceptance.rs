//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero when any
//! criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use landau::analysis::{compare_trajectories, default_window, dispersion_root, fit_exponential_envelope, timed, Norm};
use landau::cli_io::config::parse_config;
use landau::cli_io::experiment::run_experiment;
use landau::equilibria::{make_maxwellian, make_two_stream, EquilibriumProfile, SpeciesParams};
use landau::kernel::{default_fit_horizon, fit_decay_bound, FnKernel, LaplaceTable, ModeKernel, LAPLACE_TAIL_TOL};
use landau::oracle::{evolve, EtaGrid, FieldSwitch, OracleModel, OracleTrajectory, PhaseSpacePerturbation};
use landau::penrose::{
    default_omega_range, penrose_criterion, refined_margin_scan, MarginGrid, MarginScan, KERNEL_FIT_SAMPLES,
};
use landau::perturbation::SeparablePerturbation;
use landau::potential::{coulomb_potential, InteractionPotential};
use landau::volterra::{
    fit_forcing_bounds, make_forcing, solve_mode, theorem_bound, ModeForcing, ModeSeries, TheoremConstants,
};
use landau::Result;

const EPS: f64 = 1e-3;
const HORIZON: f64 = 20.0;
const DT: f64 = 1.0 / 64.0;
const D_ETA: f64 = 1.0 / 128.0;
const ETA_MAX: f64 = 40.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Shared setup of criteria 1, 3, 7 and 8.
struct Baseline {
    profile: EquilibriumProfile,
    potential: InteractionPotential,
    species: SpeciesParams,
    forcing: ModeForcing,
    kernel: ModeKernel,
    volterra: ModeSeries,
    oracle: OracleTrajectory,
    oracle_seconds: f64,
}

fn baseline() -> Result<Baseline> {
    let profile = make_maxwellian(1.0, 0.0)?;
    let potential = coulomb_potential(1)?;
    let species = SpeciesParams::hydrogen();
    let h_e = SeparablePerturbation::cosine(EPS, &[1], &profile)?;
    let h_i = SeparablePerturbation::zero();
    let forcing = make_forcing(1, Arc::new(h_e.clone()), Arc::new(h_i.clone()), 1.0)?;
    let kernel = ModeKernel::combined(1, Arc::new(profile.clone()), &potential, &species)?;
    let volterra = solve_mode(1, &forcing, &kernel, &species, HORIZON, DT)?;

    let start = Instant::now();
    let state = PhaseSpacePerturbation::from_spectra(EtaGrid::new(ETA_MAX, D_ETA)?, 1.0, &[1], &h_e, &h_i)?;
    let model = OracleModel::global(&profile, &potential, &species);
    let (oracle, _) = evolve(&state, &model, HORIZON, DT, FieldSwitch::On)?;
    let oracle_seconds = start.elapsed().as_secs_f64();
    Ok(Baseline {
        profile,
        potential,
        species,
        forcing,
        kernel,
        volterra,
        oracle,
        oracle_seconds,
    })
}

fn default_margin(b: &Baseline) -> Result<MarginScan> {
    let bound = fit_decay_bound(&b.kernel, default_fit_horizon(&b.profile, 1.0), KERNEL_FIT_SAMPLES)?;
    let (om_min, om_max) = default_omega_range(&b.profile, &b.potential, 1);
    let grid = MarginGrid {
        lambda: 0.5,
        re_steps: 11,
        om_min,
        om_max,
        om_steps: 201,
    };
    refined_margin_scan(&b.kernel, &bound, b.species.two_species_factor(), grid, 6)
}

fn criterion_1(b: &Baseline) -> Result<Outcome> {
    let oracle = b.oracle.mode_series(1)?;
    let sup = compare_trajectories(&b.volterra, &oracle, Norm::Sup)?;
    Ok(outcome(
        sup <= 1e-4 && b.oracle_seconds < 60.0,
        format!(
            "sup |d_volterra − d_oracle| = {sup:.3e} (tol 1e-4), oracle runtime {:.2} s (< 60 s)",
            b.oracle_seconds
        ),
    ))
}

fn criterion_2() -> Result<Outcome> {
    let profile = make_maxwellian(1.0, 0.0)?;
    let h_e = SeparablePerturbation::cosine(EPS, &[1], &profile)?;
    let state = PhaseSpacePerturbation::from_spectra(
        EtaGrid::new(ETA_MAX, D_ETA)?,
        1.0,
        &[1],
        &h_e,
        &SeparablePerturbation::zero(),
    )?;
    let model = OracleModel::global(&profile, &coulomb_potential(1)?, &SpeciesParams::hydrogen());
    let (traj, _) = evolve(&state, &model, 2.0, DT, FieldSwitch::Off)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let n = (t / DT).round() as usize;
        let exact = 0.5 * EPS * (-2.0 * PI * PI * t * t).exp();
        worst = worst.max((traj.rho_e[0][n].re - exact).hypot(traj.rho_e[0][n].im) / exact);
    }
    Ok(outcome(
        worst < 1e-10,
        format!("max relative error at t ∈ {{0.5, 1, 2}} = {worst:.3e} (tol 1e-10)"),
    ))
}

fn criterion_3(b: &Baseline) -> Result<Outcome> {
    let kernel_bound = fit_decay_bound(&b.kernel, default_fit_horizon(&b.profile, 1.0), KERNEL_FIT_SAMPLES)?;
    let forcing_bounds = fit_forcing_bounds(&b.forcing, &b.species, HORIZON)?;
    let scan = default_margin(b)?;
    let consts = TheoremConstants::with_default_rate(&kernel_bound, &forcing_bounds, scan.kappa, 0.5)?;
    let check = theorem_bound(&b.volterra, &consts, &b.species)?;
    let d = check.displayed;
    Ok(outcome(
        scan.kappa > 0.0 && d.holds,
        format!(
            "C0 = {:.3e}, λ0 = {}, κ = {:.4}, λ′ = {:.4}; violations e/i = {}/{}, max ratio e/i = {:.2e}/{:.2e}",
            consts.c0,
            consts.lambda0,
            consts.kappa,
            consts.lambda_prime,
            d.violations_e,
            d.violations_i,
            d.max_ratio_e,
            d.max_ratio_i
        ),
    ))
}

fn criterion_4a() -> Result<Outcome> {
    let profile = make_maxwellian(1.0, 0.0)?;
    let mut worst: f64 = 0.0;
    let mut stable = true;
    for box_length in [1.0, 2.0, 0.3] {
        for potential in [
            InteractionPotential::coulomb(3, box_length)?,
            InteractionPotential::screened(0.7, 3, box_length)?,
        ] {
            for (m_e, m_i) in [(1.0, 1.0), (1.0, 4.0), (1.0, 100.0), (1.0, 1836.0)] {
                let sp = SpeciesParams::new(m_e, m_i, 1.0)?;
                for k in 1..=3 {
                    let report = penrose_criterion(k, &profile, &potential, &sp)?;
                    let at_zero = report
                        .derivative_zeros
                        .iter()
                        .position(|z| z.abs() < 1e-9)
                        .map(|j| report.criterion_values[j]);
                    let expected = -sp.two_species_factor() * potential.w_hat(k)?;
                    worst = worst.max(at_zero.map_or(f64::INFINITY, |v| (v - expected).abs()));
                    stable &= report.stable;
                }
            }
        }
    }
    Ok(outcome(
        worst <= 1e-8 && stable,
        format!("max |value(0) + (1+r)Ŵ| = {worst:.3e} (tol 1e-8) over 72 (Ŵ, r) cases; all stable: {stable}"),
    ))
}

fn criterion_4b() -> Result<Outcome> {
    let profile = make_two_stream(4.0, 0.5)?;
    let report = penrose_criterion(1, &profile, &coulomb_potential(1)?, &SpeciesParams::new(1.0, 1.0, 1.0)?)?;
    let values: Vec<String> = report.criterion_values.iter().map(|v| format!("{v:.4}")).collect();
    Ok(outcome(
        !report.stable,
        format!(
            "verdict {}; criterion values [{}]",
            if report.stable { "stable" } else { "unstable" },
            values.join(", ")
        ),
    ))
}

fn criterion_5(b: &Baseline) -> Result<Outcome> {
    let bound = fit_decay_bound(&b.kernel, default_fit_horizon(&b.profile, 1.0), KERNEL_FIT_SAMPLES)?;
    let (om_min, om_max) = default_omega_range(&b.profile, &b.potential, 1);
    let grid = MarginGrid {
        lambda: 0.5,
        re_steps: 11,
        om_min,
        om_max,
        om_steps: 201,
    };
    let factor = b.species.two_species_factor();
    let two = landau::penrose::margin_scan(&b.kernel, &bound, factor, grid)?;
    let one = landau::penrose::margin_scan(&b.kernel, &bound, 1.0, grid)?;
    let table = LaplaceTable::for_strip(&b.kernel, &bound, grid.lambda, LAPLACE_TAIL_TOL)?;
    let mut worst: f64 = 0.0;
    for i in 0..grid.re_steps {
        for j in 0..grid.om_steps {
            let direct = (table.eval(grid.point(i, j))?.value * factor - 1.0).norm();
            let stored = (one.sample(i, j) * factor - 1.0).norm();
            worst = worst.max((direct - stored).abs());
        }
    }
    let kappa_gap = (one.kappa_with_factor(factor) - two.kappa).abs();
    Ok(outcome(
        worst <= 1e-12 && kappa_gap <= 1e-12,
        format!(
            "max pointwise gap = {worst:.3e}, κ(1+r) = {:.12}, κ(1) = {:.12}, reconstructed κ gap = {kappa_gap:.3e} (tol 1e-12)",
            two.kappa, one.kappa
        ),
    ))
}

fn criterion_6() -> Result<Outcome> {
    let kern = FnKernel::new(|s: f64| Complex64::new(-2.0 * s * (-s).exp(), 0.0));
    let forcing = ModeForcing::from_fns(1, |_| Complex64::new(1.0, 0.0), |_| Complex64::new(0.0, 0.0));
    let sp = SpeciesParams::new(1.0, 1.0, 1.0)?;
    let t_end = 5.0;
    let coarse = 0.1;
    let solve = |dt: f64| solve_mode(1, &forcing, &kern, &sp, t_end, dt).map(|s| s.difference());
    let fine_10 = solve(coarse / 80.0)?;
    let fine_20 = solve(coarse / 160.0)?;
    // Richardson extrapolation of the two finest runs, sampled on the coarse grid.
    let n_coarse = (t_end / coarse).round() as usize;
    let reference: Vec<Complex64> = (0..=n_coarse)
        .map(|m| (fine_20[160 * m] * 4.0 - fine_10[80 * m]) / 3.0)
        .collect();
    let mut errors = Vec::new();
    for level in 0..4 {
        let stride = 1usize << level;
        let d = solve(coarse / stride as f64)?;
        let e = (0..=n_coarse)
            .map(|m| (d[stride * m] - reference[m]).norm())
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok(outcome(
        pass,
        format!(
            "error ratios over dt = 0.1 → 0.0125: [{}] (band [3.5, 4.5])",
            shown.join(", ")
        ),
    ))
}

fn conservation_defect(series: &ModeSeries, forcing: &ModeForcing, sp: &SpeciesParams) -> Result<f64> {
    let r = sp.mass_ratio();
    let sum = series.weighted_sum(r);
    let scale = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (n, s) in sum.iter().enumerate() {
        let t = series.time(n);
        worst = worst.max((s - (forcing.a_e(t)? * r + forcing.a_i(t)?)).norm());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

fn criterion_7(b: &Baseline) -> Result<Outcome> {
    let mut defects = vec![conservation_defect(&b.volterra, &b.forcing, &b.species)?];
    let two_stream = make_two_stream(4.0, 0.5)?;
    let potential = InteractionPotential::coulomb(1, 2.0)?;
    for (profile, potential, sp, who) in [
        (
            b.profile.clone(),
            b.potential.clone(),
            SpeciesParams::new(1.0, 4.0, 1.0)?,
            1,
        ),
        (
            two_stream.clone(),
            potential.clone(),
            SpeciesParams::new(1.0, 1.0, 1.0)?,
            0,
        ),
        (two_stream, potential, SpeciesParams::hydrogen(), 2),
    ] {
        let pert = SeparablePerturbation::cosine(EPS, &[1], &profile)?;
        let zero = SeparablePerturbation::zero();
        let (h_e, h_i) = match who {
            0 => (pert, zero),
            1 => (zero, pert),
            _ => (pert.clone(), pert),
        };
        let forcing = make_forcing(1, Arc::new(h_e), Arc::new(h_i), potential.box_length())?;
        let kern = ModeKernel::combined(1, Arc::new(profile), &potential, &sp)?;
        let series = solve_mode(1, &forcing, &kern, &sp, 10.0, DT)?;
        defects.push(conservation_defect(&series, &forcing, &sp)?);
    }
    let worst = defects.iter().copied().fold(0.0, f64::max);
    let shown: Vec<String> = defects.iter().map(|d| format!("{d:.2e}")).collect();
    Ok(outcome(
        worst <= 1e-12,
        format!(
            "relative defect per run (Maxwellian e-, Maxwellian i+, two-stream e-, two-stream both) = [{}] (tol 1e-12)",
            shown.join(", ")
        ),
    ))
}

fn criterion_8(b: &Baseline) -> Result<Outcome> {
    let d = b.volterra.difference();
    let fit = fit_exponential_envelope(&timed(0.0, DT, &d), default_window(0.0, HORIZON))?;
    let root = dispersion_root(1, &b.profile, &b.potential, &b.species, Complex64::new(0.85, 2.0))?;
    let rel = (fit.rate - root.decay_rate.abs()).abs() / root.decay_rate.abs();
    Ok(outcome(
        rel <= 0.05,
        format!(
            "fitted rate {:.6}, |Re ξ| = {:.6}, relative gap {rel:.3e} (tol 5e-2)",
            fit.rate,
            root.decay_rate.abs()
        ),
    ))
}

fn dir_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| {
            let e = e?;
            Ok((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path())?))
        })
        .collect::<Result<_>>()?;
    files.sort();
    Ok(files)
}

fn criterion_9() -> Result<Outcome> {
    let text = "[model]\nequilibrium = maxwellian(1, 0)\n[run]\nhorizon = 20\noracle = true\n";
    let cfg = parse_config(text)?;
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    run_experiment(&cfg, a.path())?;
    run_experiment(&cfg, b.path())?;
    let (fa, fb) = (dir_bytes(a.path())?, dir_bytes(b.path())?);
    let identical = fa == fb && !fa.is_empty();
    let bytes: usize = fa.iter().map(|f| f.1.len()).sum();
    Ok(outcome(
        identical,
        format!("{} files, {bytes} bytes, identical: {identical}", fa.len()),
    ))
}

fn main() -> ExitCode {
    let base = baseline();
    let run = |name: &str, r: Result<Outcome>| -> bool {
        match r {
            Ok(o) => {
                println!(
                    "{} criterion {name}: {}",
                    if o.pass { "PASS" } else { "FAIL" },
                    o.detail
                );
                o.pass
            }
            Err(e) => {
                println!("FAIL criterion {name}: error: {e}");
                false
            }
        }
    };
    let with_base = |f: fn(&Baseline) -> Result<Outcome>| match &base {
        Ok(b) => f(b),
        Err(e) => Err(landau::Error::Precondition(format!("baseline setup failed: {e}"))),
    };
    let results = [
        run("1 (oracle equivalence)", with_base(criterion_1)),
        run("2 (free streaming)", criterion_2()),
        run("3 (decay theorem)", with_base(criterion_3)),
        run("4a (Maxwellian criterion value)", criterion_4a()),
        run("4b (two-stream instability)", criterion_4b()),
        run("5 (two-species factor)", with_base(criterion_5)),
        run("6 (Volterra order)", criterion_6()),
        run("7 (conservation)", with_base(criterion_7)),
        run("8 (rate consistency)", with_base(criterion_8)),
        run("9 (determinism)", criterion_9()),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
