#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use landau::analysis::fit_exponential_envelope;
use landau::cli_io::config::load_config;
use landau::cli_io::csv;
use landau::cli_io::experiment::{
    build_model, dispersion_for_mode, kernel_table, penrose_analysis, resolve_output_dir, run_experiment,
};
use landau::{Error, Result};

#[derive(Parser)]
#[command(
    name = "landau",
    version,
    about = "Linear Landau damping for two-species Vlasov-Poisson plasmas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory; overrides LANDAU_OUTPUT_DIR and the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Exit with status 4 when any mode fails the stability criterion.
        #[arg(long)]
        require_stable: bool,
    },
    /// Penrose criterion and stability margin per mode, as JSON.
    Penrose {
        config: PathBuf,
        #[arg(long)]
        k: Option<i64>,
    },
    /// Dominant root of the dispersion function, as JSON.
    Dispersion {
        config: PathBuf,
        #[arg(long)]
        k: Option<i64>,
    },
    /// Fit an exponential envelope to one column of a CSV file.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        column: String,
        /// Fit window `start,end`.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Tabulate the combined memory kernel of one mode as CSV.
    ExportKernel {
        config: PathBuf,
        #[arg(long)]
        k: i64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?;
    if !(a < b) {
        return Err(format!("window start {a} must precede end {b}"));
    }
    Ok((a, b))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn modes_for(cfg_modes: &[i64], k: Option<i64>) -> Vec<i64> {
    k.map_or_else(|| cfg_modes.to_vec(), |k| vec![k])
}

fn execute(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Run {
            config,
            output,
            require_stable,
        } => {
            let cfg = load_config(&config)?;
            let dir = resolve_output_dir(&cfg, output.as_deref());
            let report = run_experiment(&cfg, &dir)?;
            print_json(&report)?;
            if require_stable && !report.stable {
                eprintln!("stability criterion failed");
                return Ok(ExitCode::from(4));
            }
        }
        Command::Penrose { config, k } => {
            let cfg = load_config(&config)?;
            let model = build_model(&cfg)?;
            let reports = modes_for(&cfg.modes, k)
                .into_iter()
                .map(|k| penrose_analysis(&cfg, &model, k).map(|r| r.0))
                .collect::<Result<Vec<_>>>()?;
            print_json(&reports)?;
        }
        Command::Dispersion { config, k } => {
            let cfg = load_config(&config)?;
            let model = build_model(&cfg)?;
            let roots = modes_for(&cfg.modes, k)
                .into_iter()
                .map(|k| dispersion_for_mode(&model, k))
                .collect::<Result<Vec<_>>>()?;
            print_json(&roots)?;
        }
        Command::Fit {
            csv: path,
            column,
            window,
        } => {
            let data = csv::read_column(&path, &column)?;
            let (t0, t1) = match (data.first(), data.last()) {
                (Some(a), Some(b)) => (a.0, b.0),
                _ => return Err(Error::InsufficientData(format!("{} has no rows", path.display()))),
            };
            let window = window.unwrap_or_else(|| landau::analysis::default_window(t0, t1));
            let samples: Vec<_> = data
                .iter()
                .map(|&(t, v)| (t, num_complex::Complex64::new(v, 0.0)))
                .collect();
            print_json(&fit_exponential_envelope(&samples, window)?)?;
        }
        Command::ExportKernel { config, k, output } => {
            let cfg = load_config(&config)?;
            let (header, rows) = kernel_table(&cfg, k)?;
            match output {
                Some(p) => csv::write(Path::new(&p), &header, &rows)?,
                None => print!("{}", csv::render(&header, &rows)),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            match &e {
                Error::Config(diags) => {
                    for d in diags {
                        eprintln!("config line {}: {}: {}", d.line, d.key, d.message);
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
