//! Points, spatial dimension and N-particle configurations.
//!
//! Points are stored as `[f64; 3]` for both supported dimensions. In one
//! dimension only the first coordinate is meaningful and the other two are
//! kept at zero.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point = [f64; 3];

/// Spatial dimension. Only d = 1 and d = 3 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    One,
    Three,
}

impl Dimension {
    pub fn from_int(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dimension::One),
            3 => Ok(Dimension::Three),
            _ => Err(Error::param("dimension", format!("{d} is not one of {{1, 3}}"))),
        }
    }

    pub fn as_int(self) -> usize {
        match self {
            Dimension::One => 1,
            Dimension::Three => 3,
        }
    }

    /// Number of meaningful coordinates in a [`Point`].
    pub fn coords(self) -> usize {
        self.as_int()
    }
}

#[inline]
pub fn point1(x: f64) -> Point {
    [x, 0.0, 0.0]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Positions of N particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub dim: Dimension,
    pub positions: Vec<Point>,
}

impl Configuration {
    pub fn new(dim: Dimension, positions: Vec<Point>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::param(
                "positions",
                format!("need at least 2 particles, got {}", positions.len()),
            ));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::param("positions", "non-finite coordinate"));
        }
        let mut positions = positions;
        if dim == Dimension::One {
            for p in &mut positions {
                p[1] = 0.0;
                p[2] = 0.0;
            }
        }
        Ok(Self { dim, positions })
    }

    pub fn from_1d(xs: &[f64]) -> Result<Self> {
        Self::new(Dimension::One, xs.iter().map(|&x| point1(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translated(&self, shift: Point) -> Self {
        let shift = match self.dim {
            Dimension::One => point1(shift[0]),
            Dimension::Three => shift,
        };
        Self {
            dim: self.dim,
            positions: self.positions.iter().map(|&p| add(p, shift)).collect(),
        }
    }
}
