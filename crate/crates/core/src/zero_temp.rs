//! Zero-temperature evaluation of `E_{N,Omega}(v)` and `F_SCE[nu]`.
//!
//! `E_{N,Omega}(v) = inf_{r_i in Omega} c_alpha(r) - sum_i v(r_i)` is
//! approximated by the best of many projected-gradient descents with
//! Armijo backtracking, from independent random starts. Starts are keyed by
//! `(seed, start index)`, so the start sets for increasing `n_starts` are
//! nested and the returned value is monotone non-increasing in `n_starts`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{point1, scale, Configuration, Dimension, Point};
use crate::kernels::cost_and_gradient;
use crate::model::{external_term, Density, DualCharge, Potential, Support};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartStrategy {
    Uniform,
    /// Start 0 is a structured configuration (evenly spaced points on an
    /// interval, or a Fibonacci sphere at 0.7 R); the rest are uniform.
    Structured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartConfig {
    pub n_starts: usize,
    pub max_descent_iters: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub tol: f64,
    pub alpha: f64,
    pub seed: u64,
    pub strategy: StartStrategy,
}

impl MultistartConfig {
    /// `n_starts = 64 N`, `alpha = 1e-3 diam(Omega)`.
    pub fn for_density(rho: &Density) -> Self {
        Self {
            n_starts: 64 * rho.n,
            max_descent_iters: 5000,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 0.1 * rho.support.diameter(),
            tol: 1e-13,
            alpha: 1e-3 * rho.support.diameter(),
            seed: 0,
            strategy: StartStrategy::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::param("n_starts", "need at least one start"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", format!("{} must be positive", self.alpha)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::param("shrink", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::param("initial_step", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub value: f64,
    pub minimizer: Configuration,
    pub unconverged_fraction: f64,
    /// More than 20% of the descents hit the iteration cap.
    pub flagged: bool,
}

struct Objective<'a, P: ?Sized> {
    potential: &'a P,
    dim: Dimension,
    alpha: f64,
}

impl<P: Potential + ?Sized> Objective<'_, P> {
    fn eval(&self, x: &[Point], grad: &mut [Point]) -> f64 {
        let mut f = cost_and_gradient(self.dim, x, self.alpha, grad);
        for (p, g) in x.iter().zip(grad.iter_mut()) {
            f -= self.potential.value(*p);
            let gv = self.potential.gradient(*p);
            for k in 0..3 {
                g[k] -= gv[k];
            }
        }
        f
    }

    fn value(&self, x: &[Point], scratch: &mut [Point]) -> f64 {
        self.eval(x, scratch)
    }
}

fn structured_start(support: &Support, n: usize) -> Vec<Point> {
    match *support {
        Support::Interval { a, b } => (0..n)
            .map(|i| point1(a + (b - a) * (i as f64 + 0.5) / n as f64))
            .collect(),
        Support::Ball { radius } => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let rxy = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    scale([rxy * th.cos(), rxy * th.sin(), z], 0.7 * radius)
                })
                .collect()
        }
    }
}

fn start_config(rho: &Density, cfg: &MultistartConfig, k: usize) -> Vec<Point> {
    if k == 0 && cfg.strategy == StartStrategy::Structured {
        return structured_start(&rho.support, rho.n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(k as u64);
    (0..rho.n).map(|_| rho.support.sample_uniform(&mut rng)).collect()
}

/// Projected gradient descent from `x`; returns (value, converged).
fn descend<P: Potential + ?Sized>(
    obj: &Objective<'_, P>,
    support: &Support,
    mut x: Vec<Point>,
    cfg: &MultistartConfig,
) -> (f64, Vec<Point>, bool) {
    let n = x.len();
    let mut grad = vec![[0.0; 3]; n];
    let mut scratch = vec![[0.0; 3]; n];
    let mut f = obj.eval(&x, &mut grad);
    let mut t = cfg.initial_step;
    let mut trial = x.clone();
    for _ in 0..cfg.max_descent_iters {
        let mut accepted = false;
        let mut step_sq = 0.0;
        let mut f_new = f;
        while t > 1e-18 {
            step_sq = 0.0;
            for i in 0..n {
                let y = [
                    x[i][0] - t * grad[i][0],
                    x[i][1] - t * grad[i][1],
                    x[i][2] - t * grad[i][2],
                ];
                trial[i] = support.project(y);
                for k in 0..3 {
                    step_sq += (trial[i][k] - x[i][k]).powi(2);
                }
            }
            if step_sq == 0.0 {
                return (f, x, true);
            }
            f_new = obj.value(&trial, &mut scratch);
            if f_new <= f - cfg.armijo / t * step_sq {
                accepted = true;
                break;
            }
            t *= cfg.shrink;
        }
        if !accepted {
            // no descent direction at floating-point resolution
            return (f, x, true);
        }
        let decrease = f - f_new;
        std::mem::swap(&mut x, &mut trial);
        f = obj.eval(&x, &mut grad);
        if decrease <= cfg.tol * (1.0 + f.abs()) || step_sq.sqrt() <= cfg.tol {
            return (f, x, true);
        }
        t = (t / cfg.shrink).min(cfg.initial_step);
    }
    (f, x, false)
}

/// `E_{N,Omega}(v)` for an arbitrary potential.
pub fn e_n_omega_for<P: Potential + ?Sized>(
    potential: &P,
    rho: &Density,
    cfg: &MultistartConfig,
) -> Result<EnergyEstimate> {
    cfg.validate()?;
    if potential.dim() != rho.dim() {
        return Err(Error::param("potential", "dimension differs from the density"));
    }
    let obj = Objective {
        potential,
        dim: rho.dim(),
        alpha: cfg.alpha,
    };
    let runs: Vec<(f64, Vec<Point>, bool)> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|k| descend(&obj, &rho.support, start_config(rho, cfg, k), cfg))
        .collect();
    let unconverged = runs.iter().filter(|r| !r.2).count();
    let (value, best) = runs
        .into_iter()
        .map(|(f, x, _)| (f, x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("n_starts >= 1");
    let fraction = unconverged as f64 / cfg.n_starts as f64;
    Ok(EnergyEstimate {
        value,
        minimizer: Configuration {
            dim: rho.dim(),
            positions: best,
        },
        unconverged_fraction: fraction,
        flagged: fraction > 0.2,
    })
}

/// `E_{N,Omega}(v[nu])`.
pub fn e_n_omega(charge: &DualCharge, rho: &Density, cfg: &MultistartConfig) -> Result<EnergyEstimate> {
    e_n_omega_for(charge, rho, cfg)
}

/// `F_SCE[nu] = E_{N,Omega}(v[nu]) + int v[nu] rho`.
pub fn f_sce(charge: &DualCharge, rho: &Density, cfg: &MultistartConfig) -> Result<f64> {
    Ok(e_n_omega(charge, rho, cfg)?.value + external_term(charge, rho)?)
}

/// `F_SCE` for any potential whose `int v rho` is known.
pub fn f_sce_for<P: Potential + ?Sized>(
    potential: &P,
    external: f64,
    rho: &Density,
    cfg: &MultistartConfig,
) -> Result<f64> {
    Ok(e_n_omega_for(potential, rho, cfg)?.value + external)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisSet;
    use std::sync::Arc;

    #[test]
    fn free_pair_in_ball_goes_antipodal() {
        let rho = Density::uniform_ball(2, 1.0).unwrap();
        let charge = DualCharge::zeros(Arc::new(BasisSet::shells(1.0, 3).unwrap()));
        let mut cfg = MultistartConfig::for_density(&rho);
        cfg.n_starts = 16;
        let e = e_n_omega(&charge, &rho, &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 1e-6, "{}", e.value);
        assert!(!e.flagged);
    }

    #[test]
    fn structured_start_inside_support() {
        let rho = Density::uniform_ball(5, 1.0).unwrap();
        for p in structured_start(&rho.support, 5) {
            assert!(rho.support.contains(p));
        }
    }
}
