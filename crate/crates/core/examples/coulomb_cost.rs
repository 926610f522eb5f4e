//! Pair kernels and the N-body Coulomb cost.
//!
//! Evaluates the cost of a few configurations in one and three dimensions,
//! compares the truncated cost with the exact one, and checks the analytic
//! gradient against a central difference.
//!
//! ```text
//! cargo run --release --example coulomb_cost
//! ```

use dualcharge::kernels::{cost, cost_gradient, kernel, truncated_cost};
use dualcharge::{Configuration, Dimension};

fn main() -> dualcharge::Result<()> {
    // In d = 1 the kernel is -|x - y|, so spreading particles lowers the cost.
    let tight = Configuration::from_1d(&[-0.1, 0.0, 0.1])?;
    let spread = Configuration::from_1d(&[-1.0, 0.0, 1.0])?;
    println!("d=1  cost(tight)  = {:+.6}", cost(&tight)?);
    println!("d=1  cost(spread) = {:+.6}", cost(&spread)?);

    let square = Configuration::new(
        Dimension::Three,
        vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
    )?;
    let k = kernel(Dimension::Three, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])?;
    println!("d=3  k(side) = {k:.6} (1/sqrt 2 = {:.6})", 1.0 / 2f64.sqrt());
    println!("d=3  cost(square) = {:.6}", cost(&square)?);

    // Truncation only matters when two particles are closer than alpha.
    let close = Configuration::new(Dimension::Three, vec![[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]])?;
    println!("d=3  cost(close pair) = {:.6}", cost(&close)?);
    for alpha in [1e-1, 1e-3] {
        println!("d=3  truncated, alpha={alpha:e}: square {:.6}, close pair {:.6}", truncated_cost(&square, alpha), truncated_cost(&close, alpha));
    }

    let grad = cost_gradient(&square)?;
    let h = 1e-6;
    let mut plus = square.clone();
    let mut minus = square.clone();
    plus.positions[0][0] += h;
    minus.positions[0][0] -= h;
    let fd = (cost(&plus)? - cost(&minus)?) / (2.0 * h);
    println!("d=3  dC/dx_1: analytic {:.8}, finite difference {fd:.8}", grad[0][0]);
    Ok(())
}
