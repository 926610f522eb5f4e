//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Integrands with endpoint singularities should be regularized by a change of
//! variables at the call site; the scheme itself only bisects.

use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kr = WGK[7] * fc;
    let mut ga = WG[3] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kr += WGK[k] * s;
        if k % 2 == 1 {
            ga += WG[k / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kr * h,
        error: ((kr - ga) * h).abs(),
    }
}

/// Integrate `f` over `[a, b]` to `max(tol.abs, tol.rel * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod(&f, a, b);
    let (mut value, mut error) = (first.value, first.error);
    heap.push(first);
    loop {
        if !value.is_finite() {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: value,
                error,
            });
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                estimate: value,
                error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // panel can no longer be split in floating point
            return Err(Error::Quadrature {
                a,
                b,
                estimate: value,
                error,
            });
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// [`integrate`] with default tolerances, returning only the value.
pub fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Result<f64> {
    integrate(f, a, b, Tolerance::default()).map(|e| e.value)
}

/// [`integrate`] with a given absolute tolerance.
pub fn quad_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs: f64) -> Result<f64> {
    integrate(
        f,
        a,
        b,
        Tolerance {
            abs,
            rel: 0.0,
            ..Tolerance::default()
        },
    )
    .map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let v = quad(|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0).unwrap();
        assert_relative_eq!(v, (1024.0 - 1.0) / 10.0 - 9.0, epsilon = 1e-12);
    }

    #[test]
    fn smooth_and_kinked() {
        let v = quad(|x: f64| x.sin(), 0.0, std::f64::consts::PI).unwrap();
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
        let v = quad(|x: f64| (x - 0.3).abs(), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.5 * (0.09 + 0.49), epsilon = 1e-9);
        let v = quad(|x: f64| x.sqrt(), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn reversed_interval_flips_sign() {
        let v = quad(|x| x, 1.0, 0.0).unwrap();
        assert_relative_eq!(v, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn non_integrable_reports_error() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, Tolerance::default());
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
