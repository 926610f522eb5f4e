use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualcharge::experiment::{run_experiment, validate, OracleKind, RunOptions, Tolerances};
use dualcharge::Error;

/// Worker threads for the sampler and the multistart search.
const WORKERS_ENV: &str = "DUALCHARGE_WORKERS";

#[derive(Parser)]
#[command(version, about = "Dual-charge solver for Coulomb multimarginal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Write into an existing output directory.
        #[arg(long)]
        overwrite: bool,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a result (summary.json or its directory) against an oracle:
    /// comb, two_electron or energy_table.
    Validate {
        result: PathBuf,
        oracle: String,
        #[arg(long)]
        sup_tol: Option<f64>,
        #[arg(long)]
        l2_tol: Option<f64>,
        #[arg(long)]
        shell_tol: Option<f64>,
        #[arg(long)]
        mass_tol: Option<f64>,
        /// Relative band `lo,hi` for F_SCE against the reference energy.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        energy_band: Option<Vec<f64>>,
        #[arg(long, default_value_t = 401)]
        grid_points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(err) = configure_workers() {
        eprintln!("error: {err}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{WORKERS_ENV}={value} is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Run {
            config,
            output_dir,
            overwrite,
            seed,
        } => {
            let options = RunOptions {
                output_dir,
                overwrite,
                seed,
            };
            let out = run_experiment(&config, &options)?;
            let r = &out.result;
            println!("output     {}", out.output_dir.display());
            println!("iterations {}", r.iterations);
            println!("mass       {:.6}", r.mass);
            if let Some(f) = r.f_sce {
                println!("F_SCE      {f:.6}");
            }
            if let Some(o) = &r.oracle {
                if let Some(sup) = o.sup_deviation {
                    println!("sup dev    {sup:.6} ({})", o.oracle.name());
                }
            }
            println!("wall clock {:.1} s", out.wall_clock_seconds);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            result,
            oracle,
            sup_tol,
            l2_tol,
            shell_tol,
            mass_tol,
            energy_band,
            grid_points,
        } => {
            let kind = OracleKind::parse(&oracle)
                .ok_or_else(|| Error::Unsupported(format!("unknown oracle `{oracle}`")))?;
            let summary = dualcharge::experiment::ExperimentResult::load(&if result.is_dir() {
                result.join(dualcharge::experiment::SUMMARY_FILE)
            } else {
                result.clone()
            })?;
            let mut tol = Tolerances::for_oracle(kind, summary.n);
            tol.sup = sup_tol.or(tol.sup);
            tol.l2 = l2_tol.or(tol.l2);
            tol.shell_relative = shell_tol.or(tol.shell_relative);
            if let (Some(width), Some((target, _))) = (mass_tol, tol.mass) {
                tol.mass = Some((target, width));
            }
            if let Some(band) = energy_band {
                tol.energy_band = Some((band[0], band[1]));
            }
            let report = validate(&result, kind, &tol, grid_points)?;
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
