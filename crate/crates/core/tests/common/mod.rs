//! Helpers shared by the integration test binaries.
#![allow(dead_code)]

use dualcharge::geometry::Point;
use dualcharge::model::Potential;

/// Central finite-difference gradient of a potential.
pub fn fd_gradient<P: Potential + ?Sized>(p: &P, r: Point, h: f64) -> Point {
    let mut g = [0.0; 3];
    for k in 0..p.dim().coords() {
        let (mut a, mut b) = (r, r);
        a[k] += h;
        b[k] -= h;
        g[k] = (p.value(a) - p.value(b)) / (2.0 * h);
    }
    g
}

/// Exact projection onto `{x >= 0, m.x <= cap}` by enumerating active sets.
pub fn brute_force_projection(y: &[f64], m: &[f64], cap: f64) -> Vec<f64> {
    let n = y.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for zeros in 0u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| zeros & (1 << i) == 0).collect();
        let mut candidates = Vec::new();
        let mut x = vec![0.0; n];
        for &i in &free {
            x[i] = y[i];
        }
        candidates.push(x);
        let mm: f64 = free.iter().map(|&i| m[i] * m[i]).sum();
        if mm > 0.0 {
            let lambda = (free.iter().map(|&i| m[i] * y[i]).sum::<f64>() - cap) / mm;
            let mut x = vec![0.0; n];
            for &i in &free {
                x[i] = y[i] - lambda * m[i];
            }
            candidates.push(x);
        }
        for x in candidates {
            let feasible = x.iter().all(|v| *v >= -1e-12)
                && x.iter().zip(m).map(|(a, b)| a * b).sum::<f64>() <= cap + 1e-12;
            if feasible {
                let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, x));
                }
            }
        }
    }
    best.expect("the origin is always feasible").1
}

