//! Target densities, dual-charge bases, the potential `v[nu]` and Coulomb
//! energies `D(mu, nu)`.
//!
//! Every measure that the sampler or optimizer touches decomposes into a
//! finite sum of [`Atom`]s: uniform segments and point charges in d = 1,
//! uniform balls centred at the origin in d = 3. Potentials and mutual
//! energies of atoms have closed forms (Newton's theorem in d = 3), so
//! quadrature is only needed for the oracle-only polynomial profiles.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{norm, point1, scale, Dimension, Point};
use crate::quadrature::{integrate, Tolerance};
use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-8;

#[inline]
pub fn ball_volume(radius: f64) -> f64 {
    4.0 / 3.0 * PI * radius.powi(3)
}

/// Bounded support of a density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Interval { a: f64, b: f64 },
    Ball { radius: f64 },
}

impl Support {
    pub fn dim(&self) -> Dimension {
        match self {
            Support::Interval { .. } => Dimension::One,
            Support::Ball { .. } => Dimension::Three,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Support::Interval { a, b } => b - a,
            Support::Ball { radius } => 2.0 * radius,
        }
    }

    /// Lebesgue measure (length or volume).
    pub fn measure(&self) -> f64 {
        match *self {
            Support::Interval { a, b } => b - a,
            Support::Ball { radius } => ball_volume(radius),
        }
    }

    pub fn contains(&self, r: Point) -> bool {
        match *self {
            Support::Interval { a, b } => r[0] >= a && r[0] <= b,
            Support::Ball { radius } => norm(r) <= radius,
        }
    }

    /// Nearest point of the support.
    pub fn project(&self, r: Point) -> Point {
        match *self {
            Support::Interval { a, b } => point1(r[0].clamp(a, b)),
            Support::Ball { radius } => {
                let s = norm(r);
                if s > radius {
                    scale(r, radius / s)
                } else {
                    r
                }
            }
        }
    }

    /// Uniform sample from the support.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Support::Interval { a, b } => point1(rng.random_range(a..=b)),
            Support::Ball { radius } => loop {
                let p: Point = [
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                ];
                let s2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                if s2 <= 1.0 {
                    break scale(p, radius);
                }
            },
        }
    }
}

/// Piecewise polynomial on consecutive intervals; coefficients are in powers
/// of the absolute coordinate `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<f64>,
}

impl PiecewisePolynomial {
    pub fn value(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| x >= p.a && x <= p.b)
            .map(|p| p.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c))
            .unwrap_or(0.0)
    }

    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                p.coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let e = k as i32 + 1;
                        c * (p.b.powi(e) - p.a.powi(e)) / e as f64
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    a: p.a,
                    b: p.b,
                    coeffs: p.coeffs.iter().map(|c| c * s).collect(),
                })
                .collect(),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = self.pieces.iter().flat_map(|p| [p.a, p.b]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        xs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Uniform,
    /// Oracle-only; the sampler rejects it.
    Polynomial(PiecewisePolynomial),
}

/// One-particle density with `int rho = N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    pub n: usize,
    pub support: Support,
    pub profile: Profile,
}

impl Density {
    pub fn uniform_interval(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::check_n(n)?;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::param("support", format!("empty or unbounded interval [{a}, {b}]")));
        }
        Ok(Self {
            n,
            support: Support::Interval { a, b },
            profile: Profile::Uniform,
        })
    }

    pub fn uniform_ball(n: usize, radius: f64) -> Result<Self> {
        Self::check_n(n)?;
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::param("radius", format!("{radius} must be positive and finite")));
        }
        Ok(Self {
            n,
            support: Support::Ball { radius },
            profile: Profile::Uniform,
        })
    }

    /// Non-negative 1D profile rescaled so that it integrates to `n`.
    pub fn polynomial_1d(n: usize, shape: PiecewisePolynomial) -> Result<Self> {
        Self::check_n(n)?;
        let bps = shape.breakpoints();
        if shape.pieces.is_empty() || bps.len() < 2 {
            return Err(Error::param("profile", "no pieces"));
        }
        let z = shape.integral();
        if !(z > 0.0) {
            return Err(Error::param("profile", format!("integral {z} is not positive")));
        }
        let density = Self {
            n,
            support: Support::Interval {
                a: bps[0],
                b: *bps.last().unwrap(),
            },
            profile: Profile::Polynomial(shape.scaled(n as f64 / z)),
        };
        let found = density.total_mass_by_quadrature()?;
        if ((found - n as f64) / n as f64).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized {
                expected: n as f64,
                found,
            });
        }
        Ok(density)
    }

    /// Unnormalized 1D profile, taken as is. Used by oracles that must reject
    /// densities whose integral is not `n`.
    pub fn raw_polynomial_1d(n: usize, profile: PiecewisePolynomial) -> Result<Self> {
        Self::check_n(n)?;
        let bps = profile.breakpoints();
        if bps.len() < 2 {
            return Err(Error::param("profile", "no pieces"));
        }
        Ok(Self {
            n,
            support: Support::Interval {
                a: bps[0],
                b: *bps.last().unwrap(),
            },
            profile: Profile::Polynomial(profile),
        })
    }

    fn check_n(n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::param("N", format!("need N >= 2, got {n}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> Dimension {
        self.support.dim()
    }

    pub fn value(&self, r: Point) -> f64 {
        if !self.support.contains(r) {
            return 0.0;
        }
        match &self.profile {
            Profile::Uniform => self.n as f64 / self.support.measure(),
            Profile::Polynomial(p) => p.value(r[0]),
        }
    }

    pub fn total_mass_by_quadrature(&self) -> Result<f64> {
        let tol = Tolerance {
            abs: 1e-12,
            rel: 1e-12,
            ..Tolerance::default()
        };
        match (&self.profile, self.support) {
            (Profile::Polynomial(p), _) => {
                let mut total = 0.0;
                for piece in &p.pieces {
                    total += integrate(|x| p.value(x), piece.a, piece.b, tol)?.value;
                }
                Ok(total)
            }
            (Profile::Uniform, Support::Interval { a, b }) => {
                Ok(integrate(|x| self.value(point1(x)), a, b, tol)?.value)
            }
            (Profile::Uniform, Support::Ball { radius }) => Ok(integrate(
                |s| 4.0 * PI * s * s * self.value([s, 0.0, 0.0]),
                0.0,
                radius,
                tol,
            )?
            .value),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.profile, Profile::Uniform)
    }
}

/// Elementary measure with closed-form potential and mutual energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Atom {
    /// Constant linear density on `[a, b]`.
    Segment { a: f64, b: f64, density: f64 },
    /// Point charge in d = 1.
    Point { x: f64, charge: f64 },
    /// Uniform ball of total charge `charge`, centred at the origin.
    Ball { radius: f64, charge: f64 },
}

#[inline]
fn half_signed_square(x: f64) -> f64 {
    0.5 * x * x.abs()
}

#[inline]
fn sixth_abs_cube(x: f64) -> f64 {
    x.abs().powi(3) / 6.0
}

impl Atom {
    pub fn dim(&self) -> Dimension {
        match self {
            Atom::Segment { .. } | Atom::Point { .. } => Dimension::One,
            Atom::Ball { .. } => Dimension::Three,
        }
    }

    pub fn charge(&self) -> f64 {
        match *self {
            Atom::Segment { a, b, density } => density * (b - a),
            Atom::Point { charge, .. } | Atom::Ball { charge, .. } => charge,
        }
    }

    pub fn potential(&self, r: Point) -> f64 {
        match *self {
            Atom::Segment { a, b, density } => {
                -density * (half_signed_square(r[0] - a) - half_signed_square(r[0] - b))
            }
            Atom::Point { x, charge } => -charge * (r[0] - x).abs(),
            Atom::Ball { radius, charge } => {
                let s = norm(r);
                if s < radius {
                    charge * (3.0 * radius * radius - s * s) / (2.0 * radius.powi(3))
                } else {
                    charge / s
                }
            }
        }
    }

    pub fn gradient(&self, r: Point) -> Point {
        match *self {
            Atom::Segment { a, b, density } => {
                point1(-density * ((r[0] - a).abs() - (r[0] - b).abs()))
            }
            Atom::Point { x, charge } => {
                let d = r[0] - x;
                point1(if d > 0.0 {
                    -charge
                } else if d < 0.0 {
                    charge
                } else {
                    0.0
                })
            }
            Atom::Ball { radius, charge } => {
                let s = norm(r);
                if s < radius {
                    scale(r, -charge / radius.powi(3))
                } else {
                    scale(r, -charge / (s * s * s))
                }
            }
        }
    }

    /// Closed-form mutual energy `D(self, other)`.
    pub fn energy(&self, other: &Atom) -> Result<f64> {
        use Atom::*;
        match (*self, *other) {
            (Segment { a, b, density: w1 }, Segment { a: c, b: d, density: w2 }) => {
                let double = sixth_abs_cube(b - c) - sixth_abs_cube(a - c)
                    - sixth_abs_cube(b - d)
                    + sixth_abs_cube(a - d);
                Ok(-w1 * w2 * double)
            }
            (Segment { .. }, Point { x, charge }) => Ok(charge * self.potential(point1(x))),
            (Point { x, charge }, Segment { .. }) => Ok(charge * other.potential(point1(x))),
            (Point { x: x1, charge: q1 }, Point { x: x2, charge: q2 }) => {
                Ok(-q1 * q2 * (x1 - x2).abs())
            }
            (Ball { radius: r1, charge: q1 }, Ball { radius: r2, charge: q2 }) => {
                let (small, big) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
                Ok(q1 * q2 * (3.0 * big * big - 0.6 * small * small) / (2.0 * big.powi(3)))
            }
            _ => Err(Error::Unsupported(
                "Coulomb energy between measures of different dimension".into(),
            )),
        }
    }
}

/// Potential `r -> v(r)` with its gradient.
pub trait Potential: Sync {
    fn dim(&self) -> Dimension;
    fn value(&self, r: Point) -> f64;
    fn gradient(&self, r: Point) -> Point;
}

impl Potential for [Atom] {
    fn dim(&self) -> Dimension {
        self.first().map(Atom::dim).unwrap_or(Dimension::One)
    }
    fn value(&self, r: Point) -> f64 {
        self.iter().map(|a| a.potential(r)).sum()
    }
    fn gradient(&self, r: Point) -> Point {
        let mut g = [0.0; 3];
        for a in self {
            let ga = a.gradient(r);
            g = [g[0] + ga[0], g[1] + ga[1], g[2] + ga[2]];
        }
        g
    }
}

/// `v + shift` for a constant `shift`.
#[derive(Debug, Clone, Copy)]
pub struct Shifted<'a, P: ?Sized> {
    pub inner: &'a P,
    pub shift: f64,
}

impl<P: Potential + ?Sized> Potential for Shifted<'_, P> {
    fn dim(&self) -> Dimension {
        self.inner.dim()
    }
    fn value(&self, r: Point) -> f64 {
        self.inner.value(r) + self.shift
    }
    fn gradient(&self, r: Point) -> Point {
        self.inner.gradient(r)
    }
}

/// Basis function of the dual charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BasisElement {
    /// Indicator of `[a, b]`.
    Segment { a: f64, b: f64 },
    /// Unit volumetric density on the shell `inner <= |r| < outer`.
    Shell { inner: f64, outer: f64 },
}

impl BasisElement {
    pub fn dim(&self) -> Dimension {
        match self {
            BasisElement::Segment { .. } => Dimension::One,
            BasisElement::Shell { .. } => Dimension::Three,
        }
    }

    /// `int rho_i`.
    pub fn mass(&self) -> f64 {
        match *self {
            BasisElement::Segment { a, b } => b - a,
            BasisElement::Shell { inner, outer } => ball_volume(outer) - ball_volume(inner),
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        match *self {
            BasisElement::Segment { a, b } => vec![Atom::Segment { a, b, density: 1.0 }],
            BasisElement::Shell { inner, outer } => {
                let mut v = vec![Atom::Ball {
                    radius: outer,
                    charge: ball_volume(outer),
                }];
                if inner > 0.0 {
                    v.push(Atom::Ball {
                        radius: inner,
                        charge: -ball_volume(inner),
                    });
                }
                v
            }
        }
    }

    /// Radial or linear extent `(low, high)`.
    pub fn extent(&self) -> (f64, f64) {
        match *self {
            BasisElement::Segment { a, b } => (a, b),
            BasisElement::Shell { inner, outer } => (inner, outer),
        }
    }

    pub fn contains(&self, r: Point) -> bool {
        match *self {
            BasisElement::Segment { a, b } => r[0] >= a && r[0] < b,
            BasisElement::Shell { inner, outer } => {
                let s = norm(r);
                s >= inner && s < outer
            }
        }
    }

    /// `(rho_i * k)(r)`.
    pub fn potential(&self, r: Point) -> f64 {
        match *self {
            BasisElement::Segment { a, b } => Atom::Segment { a, b, density: 1.0 }.potential(r),
            BasisElement::Shell { inner, outer } => {
                shell_potential(inner, outer, norm(r))
            }
        }
    }

    /// Gradient of [`BasisElement::potential`].
    pub fn force(&self, r: Point) -> Point {
        match *self {
            BasisElement::Segment { a, b } => Atom::Segment { a, b, density: 1.0 }.gradient(r),
            BasisElement::Shell { inner, outer } => {
                let s = norm(r);
                if s == 0.0 {
                    return [0.0; 3];
                }
                scale(r, shell_radial_derivative(inner, outer, s) / s)
            }
        }
    }
}

/// Potential of a unit-density shell at radius `s`, from Newton's theorem.
#[inline]
pub fn shell_potential(inner: f64, outer: f64, s: f64) -> f64 {
    // ball of radius R and unit density: 2pi/3 (3R^2 - s^2) inside, 4pi R^3/(3s) outside
    let ball = |radius: f64| {
        if s < radius {
            2.0 * PI / 3.0 * (3.0 * radius * radius - s * s)
        } else {
            ball_volume(radius) / s
        }
    };
    if inner > 0.0 {
        ball(outer) - ball(inner)
    } else {
        ball(outer)
    }
}

#[inline]
fn shell_radial_derivative(inner: f64, outer: f64, s: f64) -> f64 {
    let ball = |radius: f64| {
        if s < radius {
            -4.0 * PI / 3.0 * s
        } else {
            -ball_volume(radius) / (s * s)
        }
    };
    if inner > 0.0 {
        ball(outer) - ball(inner)
    } else {
        ball(outer)
    }
}

/// Basis of M elements with pairwise disjoint interiors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub dim: Dimension,
    pub elements: Vec<BasisElement>,
}

impl BasisSet {
    pub fn new(elements: Vec<BasisElement>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::param("basis", "needs at least one element"))?;
        let dim = first.dim();
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::param("basis", "mixed dimensions"));
        }
        for e in &elements {
            let (lo, hi) = e.extent();
            if !(lo < hi) || (dim == Dimension::Three && lo < 0.0) {
                return Err(Error::param("basis", format!("degenerate element {e:?}")));
            }
        }
        let mut ext: Vec<(f64, f64)> = elements.iter().map(BasisElement::extent).collect();
        ext.sort_by(|x, y| x.0.total_cmp(&y.0));
        if ext.windows(2).any(|w| w[1].0 < w[0].1 - 1e-12) {
            return Err(Error::param("basis", "elements overlap"));
        }
        Ok(Self { dim, elements })
    }

    /// `m` segments of equal width tiling `[a, b]`.
    pub fn segments(a: f64, b: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "needs at least one element"));
        }
        let h = (b - a) / m as f64;
        Self::new(
            (0..m)
                .map(|i| BasisElement::Segment {
                    a: a + i as f64 * h,
                    b: if i + 1 == m { b } else { a + (i + 1) as f64 * h },
                })
                .collect(),
        )
    }

    /// `m` concentric shells of equal radial width tiling the ball of `radius`.
    pub fn shells(radius: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "needs at least one element"));
        }
        let h = radius / m as f64;
        Self::new(
            (0..m)
                .map(|i| BasisElement::Shell {
                    inner: i as f64 * h,
                    outer: if i + 1 == m { radius } else { (i + 1) as f64 * h },
                })
                .collect(),
        )
    }

    /// Evenly spaced basis of the kind natural to the support.
    pub fn evenly_spaced(support: &Support, m: usize) -> Result<Self> {
        match *support {
            Support::Interval { a, b } => Self::segments(a, b, m),
            Support::Ball { radius } => Self::shells(radius, m),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.elements.iter().map(BasisElement::mass).collect()
    }

    /// Errors unless every element lies inside `support`.
    pub fn check_within(&self, support: &Support) -> Result<()> {
        if support.dim() != self.dim {
            return Err(Error::param("basis", "dimension differs from the density"));
        }
        let ok = self.elements.iter().all(|e| match (*e, *support) {
            (BasisElement::Segment { a, b }, Support::Interval { a: lo, b: hi }) => {
                a >= lo - 1e-12 && b <= hi + 1e-12
            }
            (BasisElement::Shell { outer, .. }, Support::Ball { radius }) => outer <= radius + 1e-12,
            _ => false,
        });
        if ok {
            Ok(())
        } else {
            Err(Error::param("basis", "element outside the support of rho"))
        }
    }
}

/// `rho_ext[nu] = sum_i nu_i rho_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCharge {
    pub basis: Arc<BasisSet>,
    pub weights: Vec<f64>,
}

impl DualCharge {
    pub fn new(basis: Arc<BasisSet>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != basis.len() {
            return Err(Error::param(
                "weights",
                format!("{} weights for {} basis elements", weights.len(), basis.len()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("weights", "non-finite weight"));
        }
        Ok(Self { basis, weights })
    }

    pub fn zeros(basis: Arc<BasisSet>) -> Self {
        let weights = vec![0.0; basis.len()];
        Self { basis, weights }
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.basis.clone(), weights)
    }

    /// `sum_i nu_i m_i`.
    pub fn mass(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.basis.elements)
            .map(|(w, e)| w * e.mass())
            .sum()
    }

    /// Charge density at `r`.
    pub fn density(&self, r: Point) -> f64 {
        self.weights
            .iter()
            .zip(&self.basis.elements)
            .filter(|(_, e)| e.contains(r))
            .map(|(w, _)| *w)
            .sum()
    }
}

impl Potential for DualCharge {
    fn dim(&self) -> Dimension {
        self.basis.dim
    }

    fn value(&self, r: Point) -> f64 {
        match self.basis.dim {
            Dimension::One => self
                .weights
                .iter()
                .zip(&self.basis.elements)
                .filter(|(w, _)| **w != 0.0)
                .map(|(w, e)| w * e.potential(r))
                .sum(),
            Dimension::Three => {
                let s = norm(r);
                let mut v = 0.0;
                for (w, e) in self.weights.iter().zip(&self.basis.elements) {
                    if let BasisElement::Shell { inner, outer } = *e {
                        if *w != 0.0 {
                            v += w * shell_potential(inner, outer, s);
                        }
                    }
                }
                v
            }
        }
    }

    fn gradient(&self, r: Point) -> Point {
        match self.basis.dim {
            Dimension::One => {
                let mut g = 0.0;
                for (w, e) in self.weights.iter().zip(&self.basis.elements) {
                    if *w != 0.0 {
                        g += w * e.force(r)[0];
                    }
                }
                point1(g)
            }
            Dimension::Three => {
                let s = norm(r);
                if s == 0.0 {
                    return [0.0; 3];
                }
                let mut dv = 0.0;
                for (w, e) in self.weights.iter().zip(&self.basis.elements) {
                    if let BasisElement::Shell { inner, outer } = *e {
                        if *w != 0.0 {
                            dv += w * shell_radial_derivative(inner, outer, s);
                        }
                    }
                }
                scale(r, dv / s)
            }
        }
    }
}

/// Potential of one basis element, `(rho_i * k)(r)`.
pub fn basis_potential(element: &BasisElement, r: Point) -> f64 {
    element.potential(r)
}

/// Gradient of [`basis_potential`].
pub fn basis_force(element: &BasisElement, r: Point) -> Point {
    element.force(r)
}

pub fn potential(charge: &DualCharge, r: Point) -> f64 {
    charge.value(r)
}

pub fn potential_gradient(charge: &DualCharge, r: Point) -> Point {
    charge.gradient(r)
}

pub fn charge_mass(charge: &DualCharge) -> f64 {
    charge.mass()
}

/// How a measure enters a Coulomb-energy computation.
pub enum Decomposition {
    Atoms(Vec<Atom>),
    /// A 1D density profile that has to be integrated numerically.
    Profile1D(PiecewisePolynomial),
}

/// A finite signed measure with bounded support.
pub trait Measure {
    fn dim(&self) -> Dimension;
    fn decompose(&self) -> Decomposition;
}

impl Measure for Atom {
    fn dim(&self) -> Dimension {
        Atom::dim(self)
    }
    fn decompose(&self) -> Decomposition {
        Decomposition::Atoms(vec![*self])
    }
}

impl Measure for BasisElement {
    fn dim(&self) -> Dimension {
        BasisElement::dim(self)
    }
    fn decompose(&self) -> Decomposition {
        Decomposition::Atoms(self.atoms())
    }
}

impl Measure for DualCharge {
    fn dim(&self) -> Dimension {
        self.basis.dim
    }
    fn decompose(&self) -> Decomposition {
        let mut atoms = Vec::new();
        for (w, e) in self.weights.iter().zip(&self.basis.elements) {
            for atom in e.atoms() {
                atoms.push(scale_atom(atom, *w));
            }
        }
        Decomposition::Atoms(atoms)
    }
}

impl Measure for Density {
    fn dim(&self) -> Dimension {
        Density::dim(self)
    }
    fn decompose(&self) -> Decomposition {
        match (&self.profile, self.support) {
            (Profile::Polynomial(p), _) => Decomposition::Profile1D(p.clone()),
            (Profile::Uniform, Support::Interval { a, b }) => Decomposition::Atoms(vec![Atom::Segment {
                a,
                b,
                density: self.n as f64 / (b - a),
            }]),
            (Profile::Uniform, Support::Ball { radius }) => Decomposition::Atoms(vec![Atom::Ball {
                radius,
                charge: self.n as f64,
            }]),
        }
    }
}

impl<M: Measure + ?Sized> Measure for &M {
    fn dim(&self) -> Dimension {
        (**self).dim()
    }
    fn decompose(&self) -> Decomposition {
        (**self).decompose()
    }
}

fn scale_atom(atom: Atom, s: f64) -> Atom {
    match atom {
        Atom::Segment { a, b, density } => Atom::Segment {
            a,
            b,
            density: density * s,
        },
        Atom::Point { x, charge } => Atom::Point { x, charge: charge * s },
        Atom::Ball { radius, charge } => Atom::Ball {
            radius,
            charge: charge * s,
        },
    }
}

fn atoms_energy(a: &[Atom], b: &[Atom]) -> Result<f64> {
    let mut total = 0.0;
    for x in a {
        for y in b {
            total += x.energy(y)?;
        }
    }
    Ok(total)
}

fn profile_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-13,
        rel: 1e-10,
        max_intervals: 4000,
    }
}

/// Integrate `profile * g` piece by piece, splitting at the kinks `extra`.
fn integrate_profile<G: Fn(f64) -> f64>(profile: &PiecewisePolynomial, extra: &[f64], g: G) -> Result<f64> {
    let mut total = 0.0;
    for piece in &profile.pieces {
        let mut cuts = vec![piece.a, piece.b];
        cuts.extend(extra.iter().copied().filter(|x| *x > piece.a && *x < piece.b));
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            total += integrate(|x| profile.value(x) * g(x), w[0], w[1], profile_tolerance())?.value;
        }
    }
    Ok(total)
}

fn atom_kinks(atoms: &[Atom]) -> Vec<f64> {
    atoms
        .iter()
        .flat_map(|a| match *a {
            Atom::Segment { a, b, .. } => vec![a, b],
            Atom::Point { x, .. } => vec![x],
            Atom::Ball { radius, .. } => vec![radius],
        })
        .collect()
}

/// `D(mu, nu) = int int k_d(r - r') dmu(r) dnu(r')`, in closed form where
/// both sides decompose into atoms and by adaptive quadrature otherwise.
pub fn coulomb_energy<A: Measure + ?Sized, B: Measure + ?Sized>(mu: &A, nu: &B) -> Result<f64> {
    if mu.dim() != nu.dim() {
        return Err(Error::Unsupported(
            "Coulomb energy between measures of different dimension".into(),
        ));
    }
    match (mu.decompose(), nu.decompose()) {
        (Decomposition::Atoms(a), Decomposition::Atoms(b)) => atoms_energy(&a, &b),
        (Decomposition::Atoms(a), Decomposition::Profile1D(p))
        | (Decomposition::Profile1D(p), Decomposition::Atoms(a)) => {
            integrate_profile(&p, &atom_kinks(&a), |x| a.value(point1(x)))
        }
        (Decomposition::Profile1D(p), Decomposition::Profile1D(q)) => {
            let kinks = p.breakpoints();
            integrate_profile(&q, &kinks, |x| {
                -integrate_profile(&p, &[x], |y| (x - y).abs()).unwrap_or(f64::NAN)
            })
            .and_then(|v| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Quadrature {
                        a: f64::NAN,
                        b: f64::NAN,
                        estimate: v,
                        error: f64::INFINITY,
                    })
                }
            })
        }
    }
}

/// Table `D(rho_i, rho)` for every basis element.
pub fn basis_moments(basis: &BasisSet, rho: &Density) -> Result<Vec<f64>> {
    basis.elements.iter().map(|e| coulomb_energy(e, rho)).collect()
}

/// `int v[nu] rho = sum_i nu_i D(rho_i, rho)`.
pub fn external_term(charge: &DualCharge, rho: &Density) -> Result<f64> {
    let table = basis_moments(&charge.basis, rho)?;
    Ok(external_term_from_table(charge, &table))
}

pub fn external_term_from_table(charge: &DualCharge, table: &[f64]) -> f64 {
    charge.weights.iter().zip(table).map(|(w, d)| w * d).sum()
}
