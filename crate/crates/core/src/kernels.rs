//! Coulomb pair kernels and the N-body cost.
//!
//! In d = 3 the kernel is `1/|r - r'|`; in d = 1 it is `-|r - r'|`. The
//! truncated cost caps every d = 3 pair term at `1/alpha`. The one-dimensional
//! kernel is globally Lipschitz and is never truncated.

use crate::geometry::{dist, point1, sub, Configuration, Dimension, Point};
use crate::{Error, Result};

/// Pair kernel `k_d(r - r')`.
pub fn kernel(d: Dimension, r: Point, rp: Point) -> Result<f64> {
    match d {
        Dimension::One => Ok(-(r[0] - rp[0]).abs()),
        Dimension::Three => {
            let s = dist(r, rp);
            if s == 0.0 {
                Err(Error::Singular { i: 0, j: 1 })
            } else {
                Ok(1.0 / s)
            }
        }
    }
}

/// Sum of the kernel over all unordered pairs.
pub fn cost(config: &Configuration) -> Result<f64> {
    let p = &config.positions;
    let mut total = 0.0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            total += kernel(config.dim, p[i], p[j]).map_err(|_| Error::Singular { i, j })?;
        }
    }
    Ok(total)
}

/// Pair term of the truncated cost: `min{1/alpha, 1/s}` in d = 3.
#[inline]
pub fn truncated_pair(s: f64, alpha: f64) -> f64 {
    if s >= alpha {
        1.0 / s
    } else {
        1.0 / alpha
    }
}

/// Truncated Coulomb cost `c_alpha`. For d = 1 this is the plain cost.
pub fn truncated_cost(config: &Configuration, alpha: f64) -> f64 {
    let p = &config.positions;
    match config.dim {
        Dimension::One => cost(config).expect("1D cost is total"),
        Dimension::Three => {
            let mut total = 0.0;
            for i in 0..p.len() {
                for j in (i + 1)..p.len() {
                    total += truncated_pair(dist(p[i], p[j]), alpha);
                }
            }
            total
        }
    }
}

/// Gradient of the cost with respect to every particle position.
pub fn cost_gradient(config: &Configuration) -> Result<Vec<Point>> {
    let p = &config.positions;
    let mut grad = vec![[0.0; 3]; p.len()];
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let g = pair_gradient(config.dim, p[i], p[j], None).ok_or(Error::Singular { i, j })?;
            accumulate(&mut grad, i, j, g);
        }
    }
    Ok(grad)
}

/// Gradient of the truncated cost; pair terms vanish below distance `alpha`.
pub fn truncated_cost_gradient(config: &Configuration, alpha: f64) -> Vec<Point> {
    let p = &config.positions;
    let mut grad = vec![[0.0; 3]; p.len()];
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            let g = pair_gradient(config.dim, p[i], p[j], Some(alpha)).unwrap_or([0.0; 3]);
            accumulate(&mut grad, i, j, g);
        }
    }
    grad
}

#[inline]
fn accumulate(grad: &mut [Point], i: usize, j: usize, g: Point) {
    for k in 0..3 {
        grad[i][k] += g[k];
        grad[j][k] -= g[k];
    }
}

/// Gradient of the pair term with respect to `a`. With `alpha` set the d = 3
/// term is capped (zero gradient strictly below `alpha`). Returns `None` at a
/// d = 3 coincidence without truncation.
#[inline]
pub(crate) fn pair_gradient(d: Dimension, a: Point, b: Point, alpha: Option<f64>) -> Option<Point> {
    match d {
        Dimension::One => {
            let diff = a[0] - b[0];
            let sgn = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            Some(point1(-sgn))
        }
        Dimension::Three => {
            let v = sub(a, b);
            let s2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            let s = s2.sqrt();
            match alpha {
                Some(alpha) if s < alpha => Some([0.0; 3]),
                None if s == 0.0 => None,
                _ => {
                    let f = -1.0 / (s2 * s);
                    Some([v[0] * f, v[1] * f, v[2] * f])
                }
            }
        }
    }
}

/// Energy and gradient of the (optionally truncated) cost in one pass.
pub(crate) fn cost_and_gradient(
    dim: Dimension,
    positions: &[Point],
    alpha: f64,
    grad: &mut [Point],
) -> f64 {
    let mut total = 0.0;
    for g in grad.iter_mut() {
        *g = [0.0; 3];
    }
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let (a, b) = (positions[i], positions[j]);
            match dim {
                Dimension::One => total -= (a[0] - b[0]).abs(),
                Dimension::Three => total += truncated_pair(dist(a, b), alpha),
            }
            let g = pair_gradient(dim, a, b, Some(alpha)).unwrap_or([0.0; 3]);
            accumulate(grad, i, j, g);
        }
    }
    total
}
