use std::path::Path;
use std::process::Command;

use serde_json::Value;

use landau::cli_io::config::{parse_config, render_config, PerturbedSpecies};
use landau::cli_io::experiment::run_experiment;
use landau::Error;

const MAXWELLIAN: &str = "[model]\nequilibrium = maxwellian(1, 0)\n[run]\nhorizon = 12\noracle = false\n";
const TWO_STREAM: &str =
    "[model]\nequilibrium = two_stream(4, 0.5)\nbox_length = 2\n[species]\nm_i = 1\n[run]\nhorizon = 8\noracle = false\n";

fn read_json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn landau() -> Command {
    Command::new(env!("CARGO_BIN_EXE_landau"))
}

#[test]
fn minimal_config_fills_documented_defaults() {
    let cfg = parse_config("[model]\nequilibrium = maxwellian(1, 0)\n").unwrap();
    assert_eq!(cfg.m_i, 1836.0);
    assert_eq!(cfg.dt, 1.0 / 64.0);
    assert_eq!(cfg.amplitude, 1e-3);
    assert_eq!(cfg.perturbed_species, PerturbedSpecies::Electrons);
    assert!(cfg.defaults_filled.iter().any(|k| k == "species.m_i"));
    assert!(!cfg.defaults_filled.iter().any(|k| k == "model.equilibrium"));
    assert_eq!(parse_config(&render_config(&cfg)).unwrap().dt, cfg.dt);
}

#[test]
fn two_violations_are_both_reported() {
    let Err(Error::Config(d)) = parse_config("[run]\ndt = 0\n[species]\nm_e = -2\n") else {
        panic!()
    };
    assert_eq!(d.len(), 2, "{d:?}");
    assert_eq!((d[0].line, d[1].line), (2, 4));
}

#[test]
fn stable_maxwellian_run_records_stability_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&parse_config(MAXWELLIAN).unwrap(), dir.path()).unwrap();
    assert!(report.stable);
    assert_eq!(report.bound_holds, Some(true));
    let manifest = read_json(dir.path(), "manifest.json");
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["summary"]["stable"], true);
    assert_eq!(manifest["summary"]["bound_holds"], true);
    let fit = read_json(dir.path(), "fit.json");
    let rate = fit[0]["volterra"]["rate"].as_f64().unwrap();
    let lambda_prime = read_json(dir.path(), "theorem.json")[0]["theorem"]["check"]["constants"]["lambda_prime"]
        .as_f64()
        .unwrap();
    // the theorem's rate is a lower bound on the measured one
    assert!(rate >= lambda_prime, "{rate} < {lambda_prime}");
    let energy = fit[0]["electric_energy"]["rate"].as_f64().unwrap();
    assert!((energy / rate - 2.0).abs() < 0.05, "{energy} vs 2·{rate}");
    let (header, rows) = landau::cli_io::csv::read(&dir.path().join("volterra_k1.csv")).unwrap();
    assert_eq!(header[0], "t");
    assert_eq!(rows.len(), 12 * 64 + 1);
}

#[test]
fn two_stream_run_skips_the_theorem_and_reports_growth() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&parse_config(TWO_STREAM).unwrap(), dir.path()).unwrap();
    assert!(!report.stable);
    assert_eq!(report.bound_holds, None);
    let theorem = read_json(dir.path(), "theorem.json");
    assert_eq!(theorem[0]["theorem"]["status"], "skipped");
    assert_eq!(theorem[0]["theorem"]["reason"], "criterion failed");
    let rate = read_json(dir.path(), "fit.json")[0]["volterra"]["rate"]
        .as_f64()
        .unwrap();
    assert!(rate < 0.0, "{rate}");
    assert_eq!(read_json(dir.path(), "penrose.json")[0]["stable"], false);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = parse_config(MAXWELLIAN).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    for name in &ra.files {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.cfg");
    let unstable = dir.path().join("unstable.cfg");
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&good, MAXWELLIAN).unwrap();
    std::fs::write(&unstable, TWO_STREAM).unwrap();
    std::fs::write(&bad, "[run]\ndt = -1\nnope = 3\n").unwrap();

    let out = landau()
        .arg("run")
        .arg(&good)
        .arg("--output")
        .arg(dir.path().join("a"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let out = landau()
        .arg("run")
        .arg(&unstable)
        .arg("--require-stable")
        .env("LANDAU_OUTPUT_DIR", dir.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("b").join("manifest.json").exists());

    let out = landau().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("run.dt") && stderr.contains("run.nope"), "{stderr}");

    let out = landau().args(["fit", "missing.csv", "--column", "x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cli_subcommands_emit_parseable_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    std::fs::write(&cfg, MAXWELLIAN).unwrap();

    let out = landau().arg("penrose").arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["stable"], true);
    assert!(v[0]["kappa"].as_f64().unwrap() > 0.0);

    let out = landau()
        .arg("dispersion")
        .arg(&cfg)
        .args(["--k", "1"])
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v[0]["decay_rate"].as_f64().unwrap() - 0.8511).abs() < 1e-3, "{v}");

    let kernel = dir.path().join("kernel.csv");
    let out = landau()
        .arg("export-kernel")
        .arg(&cfg)
        .args(["--k", "1", "--output"])
        .arg(&kernel)
        .output()
        .unwrap();
    assert!(out.status.success());
    let (header, rows) = landau::cli_io::csv::read(&kernel).unwrap();
    assert_eq!(header, ["lag", "re_kernel", "im_kernel", "abs_kernel"]);
    assert_eq!(rows[0][1], 0.0);

    let run_dir = dir.path().join("run");
    assert!(landau()
        .arg("run")
        .arg(&cfg)
        .arg("--output")
        .arg(&run_dir)
        .output()
        .unwrap()
        .status
        .success());
    let out = landau()
        .arg("fit")
        .arg(run_dir.join("volterra_k1.csv"))
        .args(["--column", "abs_diff", "--window", "1.2,12"])
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["rate"].as_f64().unwrap() - 0.851).abs() < 0.01, "{v}");
}

#[test]
fn manifest_lists_every_filled_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(MAXWELLIAN).unwrap();
    run_experiment(&cfg, dir.path()).unwrap();
    let manifest = read_json(dir.path(), "manifest.json");
    let listed: Vec<&str> = manifest["defaults_filled"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let resolved = manifest["resolved_config"].as_str().unwrap();
    assert!(!cfg.defaults_filled.is_empty());
    for key in &cfg.defaults_filled {
        assert!(listed.contains(&key.as_str()), "{key}");
        let name = key.rsplit('.').next().unwrap();
        assert!(
            resolved
                .lines()
                .any(|l| l.trim_start_matches(['#', ' ']).starts_with(name)),
            "{key} missing from resolved config"
        );
    }
}
