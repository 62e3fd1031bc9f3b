//! Line-oriented experiment configuration.
//!
//! ```text
//! [model]
//! equilibrium = maxwellian(1, 0)
//! potential = coulomb
//!
//! [run]
//! horizon = 20
//! dt = 0.015625
//! modes = 1
//! ```
//!
//! Sections are introduced by `[name]`, entries are `key = value`, lists are comma
//! separated and `#` starts a comment. Every problem in a file is reported, each with its
//! line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::equilibria::{
    make_bump_on_tail, make_maxwellian, make_tabulated, make_two_stream, EquilibriumProfile, SpeciesParams,
};
use crate::error::{ConfigDiagnostic, Error, Result};
use crate::potential::InteractionPotential;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum EquilibriumSpec {
    Maxwellian {
        sigma: f64,
        drift: f64,
    },
    TwoStream {
        separation: f64,
        sigma: f64,
    },
    BumpOnTail {
        sigma: f64,
        bump_fraction: f64,
        bump_center: f64,
        bump_sigma: f64,
    },
    Tabulated {
        path: PathBuf,
    },
}

impl EquilibriumSpec {
    pub fn build(&self) -> Result<EquilibriumProfile> {
        match self {
            Self::Maxwellian { sigma, drift } => make_maxwellian(*sigma, *drift),
            Self::TwoStream { separation, sigma } => make_two_stream(*separation, *sigma),
            Self::BumpOnTail {
                sigma,
                bump_fraction,
                bump_center,
                bump_sigma,
            } => make_bump_on_tail(*sigma, *bump_fraction, *bump_center, *bump_sigma),
            Self::Tabulated { path } => {
                let (v, f) = super::csv::read_two_columns(path)?;
                make_tabulated(v, f)
            }
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Maxwellian { sigma, drift } => format!("maxwellian({sigma}, {drift})"),
            Self::TwoStream { separation, sigma } => format!("two_stream({separation}, {sigma})"),
            Self::BumpOnTail {
                sigma,
                bump_fraction,
                bump_center,
                bump_sigma,
            } => {
                format!("bump_on_tail({sigma}, {bump_fraction}, {bump_center}, {bump_sigma})")
            }
            Self::Tabulated { path } => format!("tabulated({})", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum PotentialSpec {
    Coulomb,
    Screened { alpha: f64 },
}

impl PotentialSpec {
    pub fn build(&self, k_max: i64, box_length: f64) -> Result<InteractionPotential> {
        match self {
            Self::Coulomb => InteractionPotential::coulomb(k_max, box_length),
            Self::Screened { alpha } => InteractionPotential::screened(*alpha, k_max, box_length),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbedSpecies {
    Electrons,
    Ions,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub equilibrium: EquilibriumSpec,
    pub potential: PotentialSpec,
    pub box_length: f64,
    pub m_e: f64,
    pub m_i: f64,
    pub e_charge: f64,
    pub perturbation_profile: EquilibriumSpec,
    pub amplitude: f64,
    pub perturbation_modes: Vec<i64>,
    pub perturbed_species: PerturbedSpecies,
    pub horizon: f64,
    pub dt: f64,
    pub modes: Vec<i64>,
    pub oracle: bool,
    pub d_eta: f64,
    pub eta_max: f64,
    pub fit_skip: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub re_steps: usize,
    pub om_steps: usize,
    pub refine: usize,
    pub theorem: bool,
    pub lambda_prime: Option<f64>,
    pub output_directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// `section.key` of every entry filled from its default.
    pub defaults_filled: Vec<String>,
}

impl ExperimentConfig {
    pub fn species(&self) -> Result<SpeciesParams> {
        SpeciesParams::new(self.m_e, self.m_i, self.e_charge)
    }

    /// Potential table covering every configured mode.
    pub fn interaction(&self) -> Result<InteractionPotential> {
        let k_max = self
            .modes
            .iter()
            .chain(&self.perturbation_modes)
            .map(|k| k.abs())
            .max()
            .unwrap_or(1)
            .max(1);
        self.potential.build(k_max, self.box_length)
    }

    pub fn writes(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

struct Entry {
    line: usize,
    value: String,
}

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["equilibrium", "potential", "box_length"]),
    ("species", &["m_e", "m_i", "e_charge"]),
    ("perturbation", &["profile", "amplitude", "modes", "species"]),
    (
        "run",
        &["horizon", "dt", "modes", "oracle", "d_eta", "eta_max", "fit_skip"],
    ),
    ("penrose", &["lambda", "re_steps", "om_steps", "refine"]),
    ("theorem", &["enabled", "lambda_prime"]),
    ("output", &["directory", "formats"]),
];

/// Parses and validates a configuration; all violations are returned together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_in(text, Path::new("."))
}

/// As [`parse_config`], resolving relative table paths against `base`.
pub fn parse_config_in(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let mut diags = Vec::new();
    let entries = tokenize(text, &mut diags);
    let mut p = Parser {
        entries,
        diags,
        defaults: Vec::new(),
    };
    let cfg = p.build(base);
    if p.diags.is_empty() {
        Ok(cfg)
    } else {
        p.diags.sort_by_key(|d| d.line);
        Err(Error::Config(p.diags))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_in(&text, path.parent().unwrap_or(Path::new(".")))
}

fn diag(line: usize, key: &str, message: impl Into<String>) -> ConfigDiagnostic {
    ConfigDiagnostic {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn tokenize(text: &str, diags: &mut Vec<ConfigDiagnostic>) -> BTreeMap<String, Entry> {
    let mut out = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                diags.push(diag(line, content, "malformed section header"));
                continue;
            };
            let name = name.trim();
            if KEYS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                diags.push(diag(line, name, "unknown section"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            diags.push(diag(line, content, "expected `key = value`"));
            continue;
        };
        let key = key.trim();
        let Some(sec) = &section else {
            diags.push(diag(line, key, "entry outside of a known section"));
            continue;
        };
        let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        let full = format!("{sec}.{key}");
        if !allowed.contains(&key) {
            diags.push(diag(line, &full, "unknown key"));
            continue;
        }
        if let Some(prev) = out.get(&full) {
            let prev: &Entry = prev;
            diags.push(diag(
                line,
                &full,
                format!("duplicate key (first set on line {})", prev.line),
            ));
            continue;
        }
        out.insert(
            full,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    out
}

struct Parser {
    entries: BTreeMap<String, Entry>,
    diags: Vec<ConfigDiagnostic>,
    defaults: Vec<String>,
}

impl Parser {
    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        match self.entries.get(key) {
            Some(e) => Some((e.line, e.value.clone())),
            None => {
                self.defaults.push(key.to_string());
                None
            }
        }
    }

    fn value<T>(
        &mut self,
        key: &str,
        default: T,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> (T, usize, bool) {
        match self.raw(key) {
            None => (default, 0, true),
            Some((line, v)) => match parse(&v) {
                Ok(x) => (x, line, true),
                Err(msg) => {
                    self.diags.push(diag(line, key, msg));
                    (default, line, false)
                }
            },
        }
    }

    fn real(&mut self, key: &str, default: f64, check: impl Fn(f64) -> Option<&'static str>) -> f64 {
        let (v, line, ok) = self.value(key, default, parse_real);
        if ok {
            if let Some(msg) = check(v) {
                self.diags.push(diag(line, key, format!("{msg}, got {v}")));
            }
        }
        v
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let (v, line, ok) = self.value(key, default, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("`{s}` is not a non-negative integer"))
        });
        if ok && v < min {
            self.diags.push(diag(line, key, format!("must be ≥ {min}, got {v}")));
        }
        v
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        self.value(key, default, |s| match s {
            "true" | "yes" | "on" => Ok(true),
            "false" | "no" | "off" => Ok(false),
            _ => Err(format!("`{s}` is not a boolean")),
        })
        .0
    }

    fn modes(&mut self, key: &str, default: Vec<i64>) -> Vec<i64> {
        let (v, line, ok) = self.value(key, default.clone(), |s| {
            s.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<i64>()
                        .map_err(|_| format!("`{}` is not an integer", x.trim()))
                })
                .collect()
        });
        if ok {
            if v.is_empty() {
                self.diags.push(diag(line, key, "needs at least one mode"));
            }
            if v.contains(&0) {
                self.diags.push(diag(line, key, "mode k = 0 is not allowed"));
            }
        }
        v
    }

    fn equilibrium(&mut self, key: &str, default: EquilibriumSpec, base: &Path) -> EquilibriumSpec {
        let (v, line, ok) = self.value(key, default.clone(), |s| parse_equilibrium(s, base));
        if ok && line > 0 {
            if let Err(e) = v.build() {
                self.diags.push(diag(line, key, e.to_string()));
            }
        }
        v
    }

    fn build(&mut self, base: &Path) -> ExperimentConfig {
        let positive = |x: f64| (!(x > 0.0 && x.is_finite())).then_some("must be positive");
        let equilibrium = self.equilibrium(
            "model.equilibrium",
            EquilibriumSpec::Maxwellian { sigma: 1.0, drift: 0.0 },
            base,
        );
        let potential = self.value("model.potential", PotentialSpec::Coulomb, parse_potential).0;
        let box_length = self.real("model.box_length", 1.0, positive);
        let m_e = self.real("species.m_e", 1.0, positive);
        let m_i = self.real("species.m_i", 1836.0, positive);
        let e_charge = self.real("species.e_charge", 1.0, positive);
        if m_e > 0.0 && m_i > 0.0 && m_i < m_e {
            let line = self.entries.get("species.m_i").map(|e| e.line).unwrap_or(0);
            self.diags
                .push(diag(line, "species.m_i", format!("must be ≥ m_e = {m_e}, got {m_i}")));
        }
        let perturbation_profile = self.equilibrium("perturbation.profile", equilibrium.clone(), base);
        let amplitude = self.real("perturbation.amplitude", 1e-3, positive);
        let perturbation_modes = self.modes("perturbation.modes", vec![1]);
        let perturbed_species = self
            .value("perturbation.species", PerturbedSpecies::Electrons, |s| match s {
                "electrons" => Ok(PerturbedSpecies::Electrons),
                "ions" => Ok(PerturbedSpecies::Ions),
                "both" => Ok(PerturbedSpecies::Both),
                _ => Err(format!("`{s}` is not one of electrons, ions, both")),
            })
            .0;
        let horizon = self.real("run.horizon", 20.0, positive);
        let dt = self.real("run.dt", 1.0 / 64.0, positive);
        let modes = self.modes("run.modes", perturbation_modes.clone());
        let oracle = self.flag("run.oracle", true);
        let d_eta_default = if dt > 0.0 && dt.is_finite() {
            (0.5 * dt).min(0.05)
        } else {
            0.05
        };
        let d_eta = self.real("run.d_eta", d_eta_default, positive);
        let eta_max = self.real("run.eta_max", 40.0, positive);
        let fit_skip = self.real("run.fit_skip", 0.1, |x| {
            (!(0.0..1.0).contains(&x)).then_some("must lie in [0, 1)")
        });
        let lambda = self.real("penrose.lambda", 0.5, positive);
        let re_steps = self.count("penrose.re_steps", 11, 2);
        let om_steps = self.count("penrose.om_steps", 201, 2);
        let refine = self.count("penrose.refine", 6, 0);
        let theorem = self.flag("theorem.enabled", true);
        let lambda_prime = match self.raw("theorem.lambda_prime") {
            None => None,
            Some((line, v)) => match parse_real(&v) {
                Ok(x) if x > 0.0 && x.is_finite() => Some(x),
                Ok(x) => {
                    self.diags
                        .push(diag(line, "theorem.lambda_prime", format!("must be positive, got {x}")));
                    None
                }
                Err(m) => {
                    self.diags.push(diag(line, "theorem.lambda_prime", m));
                    None
                }
            },
        };
        let output_directory = PathBuf::from(
            self.value("output.directory", "landau_out".to_string(), |s| Ok(s.to_string()))
                .0,
        );
        let formats = self
            .value("output.formats", vec![OutputFormat::Csv, OutputFormat::Json], |s| {
                s.split(',')
                    .map(|x| match x.trim() {
                        "csv" => Ok(OutputFormat::Csv),
                        "json" => Ok(OutputFormat::Json),
                        o => Err(format!("`{o}` is not one of csv, json")),
                    })
                    .collect()
            })
            .0;
        ExperimentConfig {
            equilibrium,
            potential,
            box_length,
            m_e,
            m_i,
            e_charge,
            perturbation_profile,
            amplitude,
            perturbation_modes,
            perturbed_species,
            horizon,
            dt,
            modes,
            oracle,
            d_eta,
            eta_max,
            fit_skip,
            lambda,
            re_steps,
            om_steps,
            refine,
            theorem,
            lambda_prime,
            output_directory,
            formats,
            defaults_filled: self.defaults.clone(),
        }
    }
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

/// Splits `name(a, b)` into the name and its arguments.
fn call(s: &str) -> std::result::Result<(&str, Vec<&str>), String> {
    let s = s.trim();
    match s.split_once('(') {
        None => Ok((s, Vec::new())),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(str::trim).collect()
            };
            Ok((name.trim(), args))
        }
    }
}

fn reals(args: &[&str], n: usize, name: &str) -> std::result::Result<Vec<f64>, String> {
    if args.len() != n {
        return Err(format!("`{name}` takes {n} argument(s), got {}", args.len()));
    }
    args.iter().map(|a| parse_real(a)).collect()
}

fn parse_equilibrium(s: &str, base: &Path) -> std::result::Result<EquilibriumSpec, String> {
    let (name, args) = call(s)?;
    Ok(match name {
        "maxwellian" => {
            let a = reals(&args, 2, name)?;
            EquilibriumSpec::Maxwellian {
                sigma: a[0],
                drift: a[1],
            }
        }
        "two_stream" => {
            let a = reals(&args, 2, name)?;
            EquilibriumSpec::TwoStream {
                separation: a[0],
                sigma: a[1],
            }
        }
        "bump_on_tail" => {
            let a = reals(&args, 4, name)?;
            EquilibriumSpec::BumpOnTail {
                sigma: a[0],
                bump_fraction: a[1],
                bump_center: a[2],
                bump_sigma: a[3],
            }
        }
        "tabulated" => {
            if args.len() != 1 {
                return Err("`tabulated` takes a file path".into());
            }
            let p = PathBuf::from(args[0]);
            EquilibriumSpec::Tabulated {
                path: if p.is_absolute() { p } else { base.join(p) },
            }
        }
        other => return Err(format!("unknown equilibrium family `{other}`")),
    })
}

fn parse_potential(s: &str) -> std::result::Result<PotentialSpec, String> {
    let (name, args) = call(s)?;
    match name {
        "coulomb" if args.is_empty() => Ok(PotentialSpec::Coulomb),
        "screened" => {
            let a = reals(&args, 1, name)?;
            if a[0] < 0.0 {
                return Err(format!("screening alpha must be ≥ 0, got {}", a[0]));
            }
            Ok(PotentialSpec::Screened { alpha: a[0] })
        }
        other => Err(format!("unknown potential `{other}`")),
    }
}

/// Canonical text form of a configuration, with every value spelled out.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let modes = |m: &[i64]| m.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
    let potential = match cfg.potential {
        PotentialSpec::Coulomb => "coulomb".to_string(),
        PotentialSpec::Screened { alpha } => format!("screened({alpha})"),
    };
    let species = match cfg.perturbed_species {
        PerturbedSpecies::Electrons => "electrons",
        PerturbedSpecies::Ions => "ions",
        PerturbedSpecies::Both => "both",
    };
    let formats = cfg
        .formats
        .iter()
        .map(|f| match f {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = String::new();
    s += &format!(
        "[model]\nequilibrium = {}\npotential = {potential}\nbox_length = {}\n\n",
        cfg.equilibrium.label(),
        cfg.box_length
    );
    s += &format!(
        "[species]\nm_e = {}\nm_i = {}\ne_charge = {}\n\n",
        cfg.m_e, cfg.m_i, cfg.e_charge
    );
    s += &format!(
        "[perturbation]\nprofile = {}\namplitude = {}\nmodes = {}\nspecies = {species}\n\n",
        cfg.perturbation_profile.label(),
        cfg.amplitude,
        modes(&cfg.perturbation_modes)
    );
    s += &format!(
        "[run]\nhorizon = {}\ndt = {}\nmodes = {}\noracle = {}\nd_eta = {}\neta_max = {}\nfit_skip = {}\n\n",
        cfg.horizon,
        cfg.dt,
        modes(&cfg.modes),
        cfg.oracle,
        cfg.d_eta,
        cfg.eta_max,
        cfg.fit_skip
    );
    s += &format!(
        "[penrose]\nlambda = {}\nre_steps = {}\nom_steps = {}\nrefine = {}\n\n",
        cfg.lambda, cfg.re_steps, cfg.om_steps, cfg.refine
    );
    s += &format!("[theorem]\nenabled = {}\n", cfg.theorem);
    match cfg.lambda_prime {
        Some(lp) => s += &format!("lambda_prime = {lp}\n"),
        None => {
            s += "# lambda_prime = 0.9 min(lambda_plus, lambda_minus, Lambda, lambda0) per mode, see theorem.json\n"
        }
    }
    s += &format!(
        "\n[output]\ndirectory = {}\nformats = {formats}\n",
        cfg.output_directory.display()
    );
    s
}
