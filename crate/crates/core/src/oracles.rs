//! Exact solutions used as ground truth.
//!
//! In d = 1 the Kantorovich potential is generated by a comb of `N - 1` unit
//! point charges at the unit-mass quantiles of `rho`. For two electrons in
//! the uniform unit ball of R^3 the optimal plan is the antipodal map
//! `t(r) = -r/|r| (1 - |r|^3)^{1/3}`, which fixes the potential gradient and,
//! through the Laplacian, the dual charge.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{norm, point1, scale, Dimension, Point};
use crate::kernels;
use crate::model::{Atom, Decomposition, Density, Measure, Potential, Profile, Support};
use crate::quadrature::{integrate, Tolerance};
use crate::{Configuration, Error, Result};

/// Radial quadrature tolerance used by the 3D oracles.
pub const RADIAL_ABS_TOL: f64 = 1e-10;

fn radial_tol() -> Tolerance {
    Tolerance {
        abs: RADIAL_ABS_TOL,
        rel: 0.0,
        max_intervals: 4000,
    }
}

/// `N - 1` unit point charges at `l_1 < ... < l_{N-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comb1D {
    pub breakpoints: Vec<f64>,
}

impl Comb1D {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::param("breakpoints", "comb needs at least one tooth"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("breakpoints", "must be strictly increasing"));
        }
        Ok(Self { breakpoints })
    }

    /// Total charge, `N - 1`.
    pub fn mass(&self) -> f64 {
        self.breakpoints.len() as f64
    }

    pub fn atoms(&self) -> Vec<Atom> {
        self.breakpoints
            .iter()
            .map(|&x| Atom::Point { x, charge: 1.0 })
            .collect()
    }
}

impl Potential for Comb1D {
    fn dim(&self) -> Dimension {
        Dimension::One
    }
    fn value(&self, r: Point) -> f64 {
        comb_potential(self, r[0])
    }
    fn gradient(&self, r: Point) -> Point {
        let atoms = self.atoms();
        atoms.as_slice().gradient(r)
    }
}

impl Measure for Comb1D {
    fn dim(&self) -> Dimension {
        Dimension::One
    }
    fn decompose(&self) -> Decomposition {
        Decomposition::Atoms(self.atoms())
    }
}

/// Cumulative mass `int_{-inf}^x rho` of a 1D density.
pub fn cdf(rho: &Density, x: f64) -> Result<f64> {
    match (&rho.profile, rho.support) {
        (Profile::Uniform, Support::Interval { a, b }) => {
            Ok(rho.n as f64 * ((x - a) / (b - a)).clamp(0.0, 1.0))
        }
        (Profile::Polynomial(p), Support::Interval { .. }) => {
            let mut total = 0.0;
            for piece in &p.pieces {
                let hi = x.min(piece.b);
                if hi <= piece.a {
                    continue;
                }
                total += piece
                    .coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let e = k as i32 + 1;
                        c * (hi.powi(e) - piece.a.powi(e)) / e as f64
                    })
                    .sum::<f64>();
            }
            Ok(total)
        }
        _ => Err(Error::Unsupported("quantiles are defined for 1D densities only".into())),
    }
}

/// Unit-mass quantiles of `rho`, by bisection on the CDF.
pub fn breakpoints(rho: &Density) -> Result<Comb1D> {
    let (a, b) = match rho.support {
        Support::Interval { a, b } => (a, b),
        Support::Ball { .. } => {
            return Err(Error::Unsupported("the comb solution exists in d = 1 only".into()))
        }
    };
    let n = rho.n as f64;
    let total = rho.total_mass_by_quadrature()?;
    if ((total - n) / n).abs() > 1e-8 {
        return Err(Error::NotNormalized {
            expected: n,
            found: total,
        });
    }
    let mut ls = Vec::with_capacity(rho.n - 1);
    for i in 1..rho.n {
        let target = i as f64;
        let (mut lo, mut hi) = (a, b);
        while hi - lo > 1e-13 * (1.0 + b.abs().max(a.abs())) {
            let mid = 0.5 * (lo + hi);
            if cdf(rho, mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ls.push(0.5 * (lo + hi));
    }
    Comb1D::new(ls)
}

/// `v(r) = -sum_i |r - l_i|`.
pub fn comb_potential(comb: &Comb1D, r: f64) -> f64 {
    -comb.breakpoints.iter().map(|l| (r - l).abs()).sum::<f64>()
}

/// Cost of the cyclic-shift plan for a uniform density on `[a, b]`, averaged
/// over the first marginal by quadrature.
pub fn exact_1d_energy(rho: &Density) -> Result<f64> {
    let (a, b) = match (&rho.profile, rho.support) {
        (Profile::Uniform, Support::Interval { a, b }) => (a, b),
        _ => {
            return Err(Error::Unsupported(
                "exact 1D energy is implemented for uniform interval densities".into(),
            ))
        }
    };
    let n = rho.n;
    let len = b - a;
    let shift = len / n as f64;
    let map = |x: f64| a + (x - a + shift).rem_euclid(len);
    let plan_cost = |x: f64| {
        let mut xs = Vec::with_capacity(n);
        let mut cur = x;
        for _ in 0..n {
            xs.push(point1(cur));
            cur = map(cur);
        }
        kernels::cost(&Configuration {
            dim: Dimension::One,
            positions: xs,
        })
        .expect("1D cost is total")
    };
    let mut total = 0.0;
    for k in 0..n {
        let lo = a + k as f64 * shift;
        let hi = lo + shift;
        total += integrate(plan_cost, lo, hi, radial_tol())?.value;
    }
    // rho(r1)/N with rho = N/len
    Ok(total / len)
}

#[inline]
fn partner_radius(s: f64) -> f64 {
    (1.0 - s * s * s).max(0.0).cbrt()
}

fn check_unit_ball_interior(r: Point) -> Result<f64> {
    let s = norm(r);
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param(
            "r",
            format!("|r| = {s} is outside (0, 1), where the two-electron map is defined"),
        ));
    }
    Ok(s)
}

/// Optimal map of the two-electron uniform droplet.
pub fn seidl_map_2e(r: Point) -> Result<Point> {
    let s = check_unit_ball_interior(r)?;
    Ok(scale(r, -partner_radius(s) / s))
}

/// Radial component of the exact potential gradient at radius `s`.
pub fn exact_2e_radial_derivative(s: f64) -> f64 {
    let d = s + partner_radius(s);
    -1.0 / (d * d)
}

/// `grad v(r) = -(r - t(r)) / |r - t(r)|^3`.
pub fn exact_2e_gradient(r: Point) -> Result<Point> {
    let s = check_unit_ball_interior(r)?;
    Ok(scale(r, exact_2e_radial_derivative(s) / s))
}

/// Exact potential, pinned to vanish at radius `anchor`.
pub fn exact_2e_potential(r: Point, anchor: f64) -> Result<f64> {
    let s = norm(r);
    if !(s < 1.0) && s != 1.0 {
        return Err(Error::param("r", format!("|r| = {s} is outside the unit ball")));
    }
    if !(0.0..=1.0).contains(&anchor) {
        return Err(Error::param("anchor", format!("{anchor} is outside [0, 1]")));
    }
    Ok(integrate(exact_2e_radial_derivative, anchor, s, radial_tol())?.value)
}

/// Exact dual charge density `-Delta v / (4 pi)` of the two-electron droplet.
///
/// With `u = (1 - s^3)^{1/3}` and `v'(s) = -1/(s + u)^2`, the radial
/// Laplacian gives `rho_ext(s) = 2 / (4 pi s u^2 (s + u)^3)`, which carries
/// unit total charge.
pub fn exact_2e_charge(r: Point) -> Result<f64> {
    let s = check_unit_ball_interior(r)?;
    let u = partner_radius(s);
    Ok(2.0 / (4.0 * PI * s * u * u * (s + u).powi(3)))
}

/// Charge enclosed in the ball of radius `s`, from Gauss's law
/// `Q(s) = -s^2 v'(s)`.
pub fn exact_2e_enclosed_charge(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        -s * s * exact_2e_radial_derivative(s)
    }
}

/// Charge of the exact dual charge in the shell `[lo, hi]` by radial
/// quadrature. The `(1 - s^3)^{-2/3}` singularity at `s = 1` is removed by
/// integrating in `u = (1 - s^3)^{1/3}` on the outer part.
pub fn exact_2e_shell_charge_by_quadrature(lo: f64, hi: f64) -> Result<f64> {
    let lo = lo.clamp(0.0, 1.0);
    let hi = hi.clamp(0.0, 1.0);
    if hi <= lo {
        return Ok(0.0);
    }
    let split = 0.5f64.cbrt();
    // 4 pi s^2 rho_ext(s) = 2 s / (u^2 (s + u)^3)
    let inner = |s: f64| {
        let u = partner_radius(s);
        2.0 * s / (u * u * (s + u).powi(3))
    };
    // ds = -u^2/s^2 du, so the integrand becomes 2 / (s (s + u)^3) du
    let outer = |u: f64| {
        let s = partner_radius(u);
        2.0 / (s * (s + u).powi(3))
    };
    let mut total = 0.0;
    let (a, b) = (lo, hi.min(split));
    if b > a {
        total += integrate(inner, a, b, radial_tol())?.value;
    }
    let (a, b) = (lo.max(split), hi);
    if b > a {
        total += integrate(outer, partner_radius(b), partner_radius(a), radial_tol())?.value;
    }
    Ok(total)
}

/// Mean exact charge density on the shell `[lo, hi]`.
pub fn exact_2e_shell_average(lo: f64, hi: f64) -> Result<f64> {
    let q = exact_2e_shell_charge_by_quadrature(lo, hi)?;
    Ok(q / (4.0 / 3.0 * PI * (hi.powi(3) - lo.powi(3))))
}

/// `F_SCE` of the two-electron droplet: `int (rho/2) |r - t(r)|^{-1}` with
/// `rho = 2 |B_1|^{-1} 1_{B_1}`, i.e. `3 int_0^1 s^2 / (s + u(s)) ds`.
pub fn exact_2e_energy() -> Result<f64> {
    exact_2e_energy_with(radial_tol())
}

pub fn exact_2e_energy_with(tol: Tolerance) -> Result<f64> {
    let f = |s: f64| 3.0 * s * s / (s + partner_radius(s));
    Ok(integrate(f, 0.0, 0.5, tol)?.value + integrate(f, 0.5, 1.0, tol)?.value)
}

/// The exact two-electron potential as a [`Potential`], anchored at
/// `anchor`, tabulated on a fine radial grid for fast evaluation.
#[derive(Debug, Clone)]
pub struct TwoElectronPotential {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl TwoElectronPotential {
    pub fn new(anchor: f64, points: usize) -> Result<Self> {
        let points = points.max(16);
        let radii: Vec<f64> = (0..=points).map(|k| k as f64 / points as f64).collect();
        let mut values = Vec::with_capacity(radii.len());
        let mut acc = 0.0;
        values.push(0.0);
        for w in radii.windows(2) {
            acc += integrate(exact_2e_radial_derivative, w[0], w[1], radial_tol())?.value;
            values.push(acc);
        }
        let at_anchor = interpolate(&radii, &values, anchor, exact_2e_radial_derivative);
        for v in &mut values {
            *v -= at_anchor;
        }
        Ok(Self { radii, values })
    }
}

fn interpolate(radii: &[f64], values: &[f64], s: f64, slope: impl Fn(f64) -> f64) -> f64 {
    let n = radii.len() - 1;
    let h = radii[1] - radii[0];
    let k = ((s / h).floor() as usize).min(n - 1);
    let (s0, s1) = (radii[k], radii[k + 1]);
    let (v0, v1) = (values[k], values[k + 1]);
    let (d0, d1) = (slope(s0), slope(s1));
    // cubic Hermite on [s0, s1]
    let t = (s - s0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * v1
        + (t3 - t2) * h * d1
}

impl Potential for TwoElectronPotential {
    fn dim(&self) -> Dimension {
        Dimension::Three
    }
    fn value(&self, r: Point) -> f64 {
        let s = norm(r);
        if s >= 1.0 {
            // continued outside as a unit point charge
            let v1 = *self.values.last().unwrap();
            return v1 + (1.0 / s - 1.0);
        }
        let n = self.radii.len() - 1;
        if s > self.radii[n - 1] {
            // last cell holds the (1 - s)^{1/3} cusp of the slope; integrate directly
            let tail = integrate(exact_2e_radial_derivative, self.radii[n - 1], s, radial_tol())
                .map(|e| e.value)
                .unwrap_or(f64::NAN);
            return self.values[n - 1] + tail;
        }
        interpolate(&self.radii, &self.values, s, exact_2e_radial_derivative)
    }
    fn gradient(&self, r: Point) -> Point {
        let s = norm(r);
        if s == 0.0 {
            return [0.0; 3];
        }
        let ds = if s >= 1.0 {
            -1.0 / (s * s)
        } else {
            exact_2e_radial_derivative(s)
        };
        scale(r, ds / s)
    }
}
