//! Fitting the dual charge of three electrons on an interval.
//!
//! The exact optimal potential of a uniform density on `[a, b]` is the
//! potential of point charges at the interior breakpoints of the cyclic plan.
//! This example fits segment weights by Nesterov ascent and reports how close
//! the fitted potential comes to that comb, up to an additive constant.
//!
//! ```text
//! cargo run --release --example comb_recovery_1d [steps]
//! ```

use dualcharge::experiment::align;
use dualcharge::geometry::point1;
use dualcharge::model::{BasisSet, Density, Potential};
use dualcharge::optimizer::{nag_run_with, DualProblem, OptimizerConfig, SampledGradient};
use dualcharge::oracles::{breakpoints, comb_potential};

fn main() -> dualcharge::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60_000);
    let (a, b) = (-1.5, 1.5);
    let rho = Density::uniform_interval(3, a, b)?;
    let comb = breakpoints(&rho)?;
    println!("comb breakpoints {:?}, total charge {}", comb.breakpoints, comb.mass());

    let problem = DualProblem::new(rho, BasisSet::segments(a, b, 12)?)?;
    let mut cfg = OptimizerConfig::for_problem(&problem, 10.0)?;
    cfg.project_delta_b = true;
    cfg.max_iters = 200;
    cfg.sampler.n_steps = steps;
    cfg.sampler.burn_in = steps / 10;
    cfg.sampler.seed = 5;

    let mut gradient = SampledGradient {
        problem: &problem,
        sampler: cfg.sampler.clone(),
    };
    let state = nag_run_with(&problem.zero_charge(), &problem, &cfg, &mut gradient, |k, nu| {
        if k % 20 == 0 {
            println!("iteration {k:>3}  mass {:.4}", nu.mass());
        }
        Ok(())
    })?;
    let nu = problem.charge(state.nu.clone())?;

    let grid: Vec<f64> = (0..=300).map(|k| a + (b - a) * k as f64 / 300.0).collect();
    let fitted: Vec<f64> = grid.iter().map(|&x| nu.value(point1(x))).collect();
    let exact: Vec<f64> = grid.iter().map(|&x| comb_potential(&comb, x)).collect();
    let (shift, sup, l2) = align(&grid, &fitted, &exact);
    println!(
        "{} iterations (converged: {}), mass {:.4}",
        state.iteration,
        state.converged,
        nu.mass()
    );
    println!("aligned distance to the comb: sup {sup:.4}, L2 {l2:.4} (shift {shift:+.4})");
    for (w, e) in nu.weights.iter().zip(&nu.basis.elements) {
        let (lo, hi) = e.extent();
        println!("  [{lo:+.2}, {hi:+.2})  {w:.3}  {}", "#".repeat((w * 10.0) as usize));
    }
    Ok(())
}
