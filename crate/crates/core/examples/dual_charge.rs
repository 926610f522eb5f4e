//! Building a dual charge and evaluating its potential and energies.
//!
//! A dual charge is a nonnegative combination of basis elements: segments on
//! an interval, or concentric shells in a ball. Its potential, force and
//! mutual Coulomb energies all have closed forms.
//!
//! ```text
//! cargo run --release --example dual_charge
//! ```

use std::sync::Arc;

use dualcharge::model::{coulomb_energy, external_term, BasisSet, Density, DualCharge, Potential};

fn main() -> dualcharge::Result<()> {
    // One dimension: four segments on [-1, 1], charge concentrated in the middle.
    let basis = Arc::new(BasisSet::segments(-1.0, 1.0, 4)?);
    let nu = DualCharge::new(basis, vec![0.0, 1.0, 1.0, 0.0])?;
    println!("d=1 mass = {:.3}", nu.mass());
    for x in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        println!("  v({x:+.1}) = {:+.6}   v'({x:+.1}) = {:+.6}", nu.value([x, 0.0, 0.0]), nu.gradient([x, 0.0, 0.0])[0]);
    }
    let rho = Density::uniform_interval(2, -1.0, 1.0)?;
    println!("  D(nu, nu)  = {:+.6}", coulomb_energy(&nu, &nu)?);
    println!("  int v rho  = {:+.6}", external_term(&nu, &rho)?);

    // Three dimensions: a single uniform shell has constant potential inside.
    let shells = Arc::new(BasisSet::shells(1.0, 5)?);
    let mut w = vec![0.0; 5];
    w[3] = 1.0;
    let shell = DualCharge::new(shells.clone(), w)?;
    println!("d=3 shell [0.6, 0.8), mass {:.6}", shell.mass());
    for s in [0.0, 0.3, 0.6, 0.7, 0.8, 1.0] {
        println!("  v(|r|={s:.1}) = {:.6}", shell.value([s, 0.0, 0.0]));
    }
    let uniform = DualCharge::new(shells, vec![1.0; 5])?;
    println!("  self energy of unit density on the whole ball: {:.6}", coulomb_energy(&uniform, &uniform)?);
    Ok(())
}
