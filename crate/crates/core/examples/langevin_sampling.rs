//! Langevin sampling of the Gibbs ensemble of a dual charge.
//!
//! Estimates the dual gradient moments, the one-particle density histogram
//! and the free energy for a fixed potential.
//!
//! ```text
//! cargo run --release --example langevin_sampling
//! ```

use dualcharge::model::{BasisSet, Density};
use dualcharge::optimizer::{free_energy_estimate, DualProblem};
use dualcharge::sampler::{density_histogram, estimate_moments, SamplerConfig};

fn main() -> dualcharge::Result<()> {
    let rho = Density::uniform_interval(3, -1.5, 1.5)?;
    let problem = DualProblem::new(rho.clone(), BasisSet::segments(-1.5, 1.5, 6)?)?;
    let charge = problem.charge(vec![0.0, 1.0, 1.0, 1.0, 1.0, 0.0])?;

    let mut cfg = SamplerConfig::for_support(&rho.support, 5.0);
    cfg.n_steps = 50_000;
    cfg.burn_in = 5_000;
    cfg.seed = 7;

    let moments = estimate_moments(&charge, &rho, &cfg)?;
    let grad = problem.gradient(&charge, &cfg)?;
    println!("element   moment      se       gradient");
    for i in 0..moments.values.len() {
        println!(
            "{i:>4}   {:+.5}   {:.5}   {:+.5}",
            moments.values[i], moments.std_errors[i], grad.values[i]
        );
    }

    let hist = density_histogram(&charge, &rho, &cfg, 12)?;
    println!("histogram mass {:.4} from {} samples", hist.total_mass(&rho.support), hist.n_samples);
    for (c, d) in hist.centers().iter().zip(&hist.density) {
        println!("  {c:+.3}  {d:.4}  {}", "#".repeat((d * 30.0) as usize));
    }

    let (f, se) = free_energy_estimate(&charge, &rho, 5.0, 200_000, 3, cfg.alpha)?;
    println!("free energy F_beta(v) = {f:.5} +/- {se:.5}");
    Ok(())
}
