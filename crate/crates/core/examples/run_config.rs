//! Running an experiment from a config file through the library.
//!
//! This is what `dualcharge run` does, minus the argument parsing. The result
//! is written to a fresh temporary directory and then validated against the
//! oracle the config selects.
//!
//! ```text
//! cargo run --release --example run_config [config]
//! ```

use std::path::PathBuf;

use dualcharge::experiment::{run_experiment, validate, ExperimentConfig, RunOptions, Tolerances};

const SMALL: &str = "\
dimension = 1
N = 3
beta = 2, 10
M = 12
interval = -1.5, 1.5
steps = 60000
max_iters = 100
project_delta_b = true
n_starts = 32
seed = 4
";

fn main() -> dualcharge::Result<()> {
    let scratch = std::env::temp_dir().join(format!("dualcharge-example-{}", std::process::id()));
    std::fs::create_dir_all(&scratch)?;
    let config = match std::env::args().nth(1) {
        Some(path) => PathBuf::from(path),
        None => {
            let path = scratch.join("small.conf");
            std::fs::write(&path, SMALL)?;
            path
        }
    };
    let parsed = ExperimentConfig::from_path(&config)?;
    println!("N = {}, beta schedule {:?}", parsed.n, parsed.betas);

    let options = RunOptions {
        output_dir: Some(scratch.join("out")),
        overwrite: true,
        seed: None,
    };
    let out = run_experiment(&config, &options)?;
    println!("wrote {} in {:.1} s", out.output_dir.display(), out.wall_clock_seconds);
    for stage in &out.result.stages {
        println!("  beta {:>5}: {} iterations, mass {:.4}", stage.beta, stage.iterations, stage.mass);
    }
    if let Some(f) = out.result.f_sce {
        println!("F_SCE = {f:.6}");
    }
    if let Some(kind) = parsed.resolved_oracle() {
        let tol = Tolerances::for_oracle(kind, out.result.n);
        print!("{}", validate(&out.output_dir, kind, &tol, 401)?);
    }
    std::fs::remove_dir_all(&scratch)?;
    Ok(())
}
