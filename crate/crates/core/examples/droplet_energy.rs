//! Zero-temperature evaluation of a dual charge.
//!
//! `F_SCE[nu]` is the minimum of the N-body energy in the potential `v[nu]`,
//! found by multistart projected descent, plus `int v[nu] rho`. By weak
//! duality it never exceeds the optimal transport cost. The exact two-electron
//! potential attains that cost, and the zero charge gives a much weaker bound.
//!
//! ```text
//! cargo run --release --example droplet_energy
//! ```

use dualcharge::model::{BasisSet, Density};
use dualcharge::oracles::{exact_2e_energy, TwoElectronPotential};
use dualcharge::quadrature::quad;
use dualcharge::zero_temp::{e_n_omega, e_n_omega_for, f_sce, MultistartConfig};
use dualcharge::{DualCharge, Potential};
use std::sync::Arc;

fn main() -> dualcharge::Result<()> {
    let rho = Density::uniform_ball(2, 1.0)?;
    let mut ms = MultistartConfig::for_density(&rho);
    ms.seed = 1;

    let exact = TwoElectronPotential::new(0.5, 2000)?;
    let est = e_n_omega_for(&exact, &rho, &ms)?;
    // int v rho for a radial density: 4 pi int v(s) rho(s) s^2 ds
    let density = 2.0 / (4.0 / 3.0 * std::f64::consts::PI);
    let external = quad(
        |s| 4.0 * std::f64::consts::PI * s * s * density * exact.value([s, 0.0, 0.0]),
        0.0,
        1.0,
    )?;
    println!("exact potential: E_N = {:.6}, F_SCE = {:.6}", est.value, est.value + external);
    println!("  minimizer {:?}", est.minimizer.positions);
    println!("transport cost             {:.6}", exact_2e_energy()?);

    let basis = Arc::new(BasisSet::shells(1.0, 15)?);
    let zero = DualCharge::zeros(basis.clone());
    println!("zero charge:     F_SCE = {:.6}", f_sce(&zero, &rho, &ms)?);

    // a uniform charge of N - 1 = 1 over the whole ball
    let density_weights = vec![1.0 / (4.0 / 3.0 * std::f64::consts::PI); 15];
    let flat = DualCharge::new(basis, density_weights)?;
    let e = e_n_omega(&flat, &rho, &ms)?;
    println!(
        "flat charge:     F_SCE = {:.6} ({} of {} descents unconverged)",
        f_sce(&flat, &rho, &ms)?,
        (e.unconverged_fraction * ms.n_starts as f64).round(),
        ms.n_starts
    );
    Ok(())
}
