//! Two electrons in the unit ball, fitted with concentric shells.
//!
//! The exact co-motion map of this problem is known, so the fitted potential
//! and the fitted shell weights can be compared with the exact ones. The
//! inverse temperature is raised in stages with every stage warm-started from
//! the previous one.
//!
//! ```text
//! cargo run --release --example two_electron_droplet [steps]
//! ```

use dualcharge::experiment::align;
use dualcharge::model::{BasisSet, Density, Potential};
use dualcharge::optimizer::{nag_run, DualProblem, OptimizerConfig};
use dualcharge::oracles::{exact_2e_shell_average, TwoElectronPotential};

fn main() -> dualcharge::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let rho = Density::uniform_ball(2, 1.0)?;
    let problem = DualProblem::new(rho, BasisSet::shells(1.0, 15)?)?;
    let exact = TwoElectronPotential::new(0.5, 2000)?;

    let mut nu = problem.zero_charge();
    for (stage, beta) in [5.0, 20.0, 50.0].into_iter().enumerate() {
        let mut cfg = OptimizerConfig::for_problem(&problem, beta)?;
        cfg.step_size *= 3.0;
        cfg.min_iters = 50;
        cfg.max_iters = 150;
        cfg.sampler.n_steps = steps;
        cfg.sampler.burn_in = steps / 10;
        cfg.sampler.seed = 11 + stage as u64;
        let state = nag_run(&nu, &problem, &cfg)?;
        nu = problem.charge(state.nu)?;
        println!("beta {beta:>4}: {} iterations, mass {:.4}", state.iteration, nu.mass());
    }

    let grid: Vec<f64> = (0..=200).map(|k| 0.1 + 0.8 * k as f64 / 200.0).collect();
    let fitted: Vec<f64> = grid.iter().map(|&s| nu.value([s, 0.0, 0.0])).collect();
    let reference: Vec<f64> = grid.iter().map(|&s| exact.value([s, 0.0, 0.0])).collect();
    let (_, sup, l2) = align(&grid, &fitted, &reference);
    println!("potential on 0.1 <= |r| <= 0.9: sup {sup:.4}, L2 {l2:.4}");
    println!("shell            fitted   exact");
    for (w, e) in nu.weights.iter().zip(&nu.basis.elements) {
        let (lo, hi) = e.extent();
        println!("[{lo:.3}, {hi:.3})  {w:.4}   {:.4}", exact_2e_shell_average(lo, hi)?);
    }
    Ok(())
}
