//! Unadjusted Langevin sampling of the canonical Gibbs ensemble
//! `G_beta(v) ∝ exp[-beta (c_alpha - sum_i v(r_i))] dmu^{⊗N}` and Monte-Carlo
//! estimation of the moments `D(rho_i, rho[nu]) = < sum_j (rho_i * k)(r_j) >`.
//!
//! Each step moves every particle by `eta * (-grad c_alpha + grad v)` plus
//! Gaussian noise of variance `2 eta / beta`, and keeps it in the support by
//! reflection: mirror folding on an interval, specular (billiard) reflection
//! inside a ball. Billiard reflection maps the isotropic Gaussian increment to
//! a kernel that is symmetric with respect to Lebesgue measure on the ball.
//!
//! Chains draw from independent ChaCha streams keyed by `(seed, chain)`;
//! results do not depend on how chains are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{add, dot, norm, point1, scale, sub, Configuration, Dimension, Point};
use crate::kernels::cost_and_gradient;
use crate::model::{shell_potential, BasisElement, BasisSet, Density, DualCharge, Potential, Support};
use crate::{Error, Result};

const MAX_BOUNCES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Reflect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub beta: f64,
    pub eta: f64,
    pub n_chains: usize,
    pub burn_in: u64,
    pub n_steps: u64,
    pub thin: u64,
    pub seed: u64,
    pub boundary: Boundary,
    /// Truncation radius of the pair kernel used in the drift.
    pub alpha: f64,
    /// Drop the Gaussian noise. Test hook only.
    pub noiseless: bool,
}

impl SamplerConfig {
    /// Defaults scaled to the support: `eta = 1e-3 diam^2`, `alpha = 1e-3 diam`.
    pub fn for_support(support: &Support, beta: f64) -> Self {
        let diam = support.diameter();
        Self {
            beta,
            eta: 1e-3 * diam * diam,
            n_chains: 8,
            burn_in: 10_000,
            n_steps: 100_000,
            thin: 10,
            seed: 0,
            boundary: Boundary::Reflect,
            alpha: 1e-3 * diam,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", format!("{} must be positive", self.beta)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::param("eta", format!("{} must be positive", self.eta)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", format!("{} must be positive", self.alpha)));
        }
        if self.n_chains == 0 {
            return Err(Error::param("chains", "need at least one chain"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("steps", "need at least one step"));
        }
        if self.thin == 0 {
            return Err(Error::param("thin", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of retained states per chain.
    pub fn samples_per_chain(&self) -> u64 {
        self.n_steps / self.thin
    }
}

/// State of one Langevin chain.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    pub config: Configuration,
    pub support: Support,
    pub step: u64,
    pub chain: usize,
    rng: ChaCha8Rng,
    grad: Vec<Point>,
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

impl ParticleSystem {
    /// Start from a given configuration.
    pub fn new(config: Configuration, support: Support, seed: u64, chain: usize) -> Result<Self> {
        if config.dim != support.dim() {
            return Err(Error::param("config", "dimension differs from the support"));
        }
        if let Some(p) = config.positions.iter().find(|p| !support.contains(**p)) {
            return Err(Error::param("config", format!("particle {p:?} outside the support")));
        }
        let n = config.len();
        Ok(Self {
            config,
            support,
            step: 0,
            chain,
            rng: chain_rng(seed, chain),
            grad: vec![[0.0; 3]; n],
        })
    }

    /// Start from `n` independent uniform positions on the support.
    pub fn uniform(n: usize, support: Support, seed: u64, chain: usize) -> Result<Self> {
        let mut rng = chain_rng(seed, chain);
        let positions = (0..n).map(|_| support.sample_uniform(&mut rng)).collect();
        let config = Configuration::new(support.dim(), positions)?;
        Ok(Self {
            grad: vec![[0.0; 3]; n],
            config,
            support,
            step: 0,
            chain,
            rng,
        })
    }

    pub fn positions(&self) -> &[Point] {
        &self.config.positions
    }
}

fn fold_interval(x: f64, a: f64, b: f64) -> f64 {
    if x >= a && x <= b {
        return x;
    }
    let len = b - a;
    let y = (x - a).rem_euclid(2.0 * len);
    a + if y > len { 2.0 * len - y } else { y }
}

/// Move from `x` by `delta` inside the ball of `radius`, reflecting
/// specularly at the sphere.
fn billiard(mut x: Point, delta: Point, radius: f64) -> Point {
    let mut remaining = norm(delta);
    if remaining == 0.0 {
        return x;
    }
    let mut u = scale(delta, 1.0 / remaining);
    let r2 = radius * radius;
    for _ in 0..MAX_BOUNCES {
        let b = dot(x, u);
        let c = (dot(x, x) - r2).min(0.0);
        // exit distance along u; c <= 0 inside
        let t = -b + (b * b - c).max(0.0).sqrt();
        if t >= remaining {
            return add(x, scale(u, remaining));
        }
        x = add(x, scale(u, t));
        // pin the hit point to the sphere; rounding otherwise compounds per bounce
        let n = scale(x, 1.0 / norm(x));
        x = scale(n, radius);
        u = sub(u, scale(n, 2.0 * dot(u, n)));
        remaining -= t;
    }
    x
}

fn confine(support: &Support, x: Point, delta: Point) -> Point {
    match *support {
        Support::Interval { a, b } => point1(fold_interval(x[0] + delta[0], a, b)),
        Support::Ball { radius } => {
            let y = billiard(x, delta, radius);
            let s = norm(y);
            if s > radius {
                scale(y, radius / s)
            } else {
                y
            }
        }
    }
}

/// One ULA step for the Hamiltonian `c_alpha - sum_i v(r_i)`.
pub fn langevin_step<P: Potential + ?Sized>(
    state: &mut ParticleSystem,
    potential: &P,
    cfg: &SamplerConfig,
) -> Result<()> {
    let dim = state.config.dim;
    cost_and_gradient(dim, &state.config.positions, cfg.alpha, &mut state.grad);
    let noise = if cfg.noiseless {
        0.0
    } else {
        (2.0 * cfg.eta / cfg.beta).sqrt()
    };
    let coords = dim.coords();
    for i in 0..state.config.positions.len() {
        let x = state.config.positions[i];
        let gv = potential.gradient(x);
        let mut delta = [0.0; 3];
        for k in 0..coords {
            let xi: f64 = if noise > 0.0 {
                StandardNormal.sample(&mut state.rng)
            } else {
                0.0
            };
            delta[k] = cfg.eta * (gv[k] - state.grad[i][k]) + noise * xi;
        }
        let y = confine(&state.support, x, delta);
        if !(y[0].is_finite() && y[1].is_finite() && y[2].is_finite()) {
            return Err(Error::NonFinite {
                chain: state.chain,
                step: state.step,
                eta: cfg.eta,
            });
        }
        state.config.positions[i] = y;
    }
    state.step += 1;
    Ok(())
}

/// Run one chain from a uniform start, calling `visit` on each retained state.
pub fn run_chain<P, F>(potential: &P, rho: &Density, cfg: &SamplerConfig, chain: usize, mut visit: F) -> Result<()>
where
    P: Potential + ?Sized,
    F: FnMut(&[Point]),
{
    let mut state = ParticleSystem::uniform(rho.n, rho.support, cfg.seed, chain)?;
    for _ in 0..cfg.burn_in {
        langevin_step(&mut state, potential, cfg)?;
    }
    for k in 1..=cfg.n_steps {
        langevin_step(&mut state, potential, cfg)?;
        if k % cfg.thin == 0 {
            visit(state.positions());
        }
    }
    Ok(())
}

fn check_sampler_density(rho: &Density) -> Result<()> {
    if !rho.is_uniform() {
        return Err(Error::Unsupported(
            "the sampler handles uniform densities only".into(),
        ));
    }
    Ok(())
}

/// Monte-Carlo estimates of `D(rho_i, rho[nu])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: u64,
    pub chain_means: Vec<Vec<f64>>,
}

/// Values of `sum_j (rho_i * k)(r_j)` for every basis element, added into `out`.
pub fn accumulate_observables(basis: &BasisSet, positions: &[Point], out: &mut [f64]) {
    match basis.dim {
        Dimension::One => {
            for p in positions {
                for (o, e) in out.iter_mut().zip(&basis.elements) {
                    *o += e.potential(*p);
                }
            }
        }
        Dimension::Three => {
            for p in positions {
                let s = norm(*p);
                for (o, e) in out.iter_mut().zip(&basis.elements) {
                    if let BasisElement::Shell { inner, outer } = *e {
                        *o += shell_potential(inner, outer, s);
                    }
                }
            }
        }
    }
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

const SINGLE_CHAIN_BATCHES: usize = 10;

/// Estimate `D(rho_i, rho[nu])` for the basis of `charge`, sampling the
/// ensemble under `v[nu]`.
pub fn estimate_moments(charge: &DualCharge, rho: &Density, cfg: &SamplerConfig) -> Result<MomentEstimate> {
    estimate_moments_for(charge, &charge.basis, rho, cfg)
}

/// As [`estimate_moments`], for an arbitrary potential and observable basis.
pub fn estimate_moments_for<P: Potential + ?Sized>(
    potential: &P,
    observables: &BasisSet,
    rho: &Density,
    cfg: &SamplerConfig,
) -> Result<MomentEstimate> {
    cfg.validate()?;
    check_sampler_density(rho)?;
    let m = observables.len();
    let per_chain = cfg.samples_per_chain().max(1);
    let batch_len = (per_chain as usize / SINGLE_CHAIN_BATCHES).max(1);
    let chains: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut sum = vec![0.0; m];
            let mut batch = vec![0.0; m];
            let mut batches = Vec::new();
            let mut in_batch = 0usize;
            let mut count = 0u64;
            let mut obs = vec![0.0; m];
            run_chain(potential, rho, cfg, chain, |pos| {
                obs.iter_mut().for_each(|o| *o = 0.0);
                accumulate_observables(observables, pos, &mut obs);
                for i in 0..m {
                    sum[i] += obs[i];
                    batch[i] += obs[i];
                }
                count += 1;
                in_batch += 1;
                if in_batch == batch_len {
                    batches.push(batch.iter().map(|b| b / batch_len as f64).collect());
                    batch.iter_mut().for_each(|b| *b = 0.0);
                    in_batch = 0;
                }
            })?;
            let mean = sum.iter().map(|s| s / count.max(1) as f64).collect();
            Ok((mean, batches))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = vec![0.0; m];
    let mut std_errors = vec![0.0; m];
    for i in 0..m {
        let column: Vec<f64> = if cfg.n_chains >= 2 {
            chains.iter().map(|(mean, _)| mean[i]).collect()
        } else {
            chains[0].1.iter().map(|b| b[i]).collect()
        };
        let (_, se) = mean_and_stderr(&column);
        let mean = chains.iter().map(|(mean, _)| mean[i]).sum::<f64>() / cfg.n_chains as f64;
        values[i] = mean;
        std_errors[i] = se;
    }
    Ok(MomentEstimate {
        values,
        std_errors,
        n_samples: per_chain * cfg.n_chains as u64,
        chain_means: chains.into_iter().map(|(mean, _)| mean).collect(),
    })
}

/// Histogram of the one-particle density `rho[nu]`, normalized to integrate
/// to N. Radial in d = 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: u64,
}

impl Histogram {
    /// `sum_k density_k * |bin_k|`.
    pub fn total_mass(&self, support: &Support) -> f64 {
        self.density
            .iter()
            .zip(bin_measures(support, &self.edges))
            .map(|(d, w)| d * w)
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

fn bin_measures(support: &Support, edges: &[f64]) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| match support {
            Support::Interval { .. } => w[1] - w[0],
            Support::Ball { .. } => {
                crate::model::ball_volume(w[1]) - crate::model::ball_volume(w[0])
            }
        })
        .collect()
}

pub fn density_histogram<P: Potential + ?Sized>(
    potential: &P,
    rho: &Density,
    cfg: &SamplerConfig,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::param("bins", "need at least one bin"));
    }
    cfg.validate()?;
    check_sampler_density(rho)?;
    let (lo, hi) = match rho.support {
        Support::Interval { a, b } => (a, b),
        Support::Ball { radius } => (0.0, radius),
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let measures = bin_measures(&rho.support, &edges);
    let per_chain: Vec<(Vec<f64>, u64)> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut counts = vec![0.0; bins];
            let mut samples = 0u64;
            run_chain(potential, rho, cfg, chain, |pos| {
                for p in pos {
                    let x = match rho.support {
                        Support::Interval { .. } => p[0],
                        Support::Ball { .. } => norm(*p),
                    };
                    let k = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
                    counts[k] += 1.0;
                }
                samples += 1;
            })?;
            Ok((counts, samples))
        })
        .collect::<Result<Vec<_>>>()?;

    let total: u64 = per_chain.iter().map(|(_, s)| s).sum();
    let mut density = vec![0.0; bins];
    let mut std_errors = vec![0.0; bins];
    for k in 0..bins {
        let per: Vec<f64> = per_chain
            .iter()
            .map(|(c, s)| c[k] / (*s as f64 * measures[k]))
            .collect();
        let counts: f64 = per_chain.iter().map(|(c, _)| c[k]).sum();
        density[k] = counts / (total as f64 * measures[k]);
        std_errors[k] = if per.len() >= 2 { mean_and_stderr(&per).1 } else { 0.0 };
    }
    Ok(Histogram {
        edges,
        density,
        std_errors,
        n_samples: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn fold_stays_inside() {
        for x in [-7.3, -2.0, -1.99, 0.0, 2.5, 11.0, 1e6] {
            let y = fold_interval(x, -2.0, 2.0);
            assert!((-2.0..=2.0).contains(&y), "{x} -> {y}");
        }
        assert!((fold_interval(2.5, -2.0, 2.0) - 1.5).abs() < 1e-15);
        assert!((fold_interval(-2.5, -2.0, 2.0) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn billiard_stays_inside_and_reflects() {
        let y = billiard([0.5, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0);
        assert!((y[0] - 0.5).abs() < 1e-12);
        let y = billiard([0.0, 0.3, 0.1], [40.0, -13.0, 7.0], 1.0);
        assert!(norm(y) <= 1.0 + 1e-12);
    }

    #[test]
    fn noiseless_1d_pair_drifts_apart() {
        let rho = Density::uniform_interval(2, -2.0, 2.0).unwrap();
        let basis = Arc::new(BasisSet::segments(-2.0, 2.0, 4).unwrap());
        let charge = DualCharge::zeros(basis);
        let mut cfg = SamplerConfig::for_support(&rho.support, 1.0);
        cfg.noiseless = true;
        cfg.eta = 0.1;
        let start = Configuration::from_1d(&[-1.0, 1.0]).unwrap();
        let mut st = ParticleSystem::new(start, rho.support, 0, 0).unwrap();
        for k in 1..=5 {
            langevin_step(&mut st, &charge, &cfg).unwrap();
            let expect = 1.0 + 0.1 * k as f64;
            assert!((st.positions()[1][0] - expect).abs() < 1e-12);
            assert!((st.positions()[0][0] + expect).abs() < 1e-12);
        }
        for _ in 0..20 {
            langevin_step(&mut st, &charge, &cfg).unwrap();
            assert!(rho.support.contains(st.positions()[0]));
            assert!(rho.support.contains(st.positions()[1]));
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let rho = Density::uniform_ball(3, 1.0).unwrap();
        let basis = Arc::new(BasisSet::shells(1.0, 3).unwrap());
        let charge = DualCharge::new(basis, vec![0.1, 0.2, 0.3]).unwrap();
        let cfg = SamplerConfig::for_support(&rho.support, 5.0);
        let mut a = ParticleSystem::uniform(3, rho.support, 42, 1).unwrap();
        let mut b = ParticleSystem::uniform(3, rho.support, 42, 1).unwrap();
        for _ in 0..200 {
            langevin_step(&mut a, &charge, &cfg).unwrap();
            langevin_step(&mut b, &charge, &cfg).unwrap();
        }
        assert_eq!(a.positions(), b.positions());
        let mut c = ParticleSystem::uniform(3, rho.support, 42, 2).unwrap();
        langevin_step(&mut c, &charge, &cfg).unwrap();
        assert_ne!(a.positions()[0], c.positions()[0]);
    }

    #[test]
    fn rejects_invalid_config() {
        let rho = Density::uniform_interval(2, 0.0, 1.0).unwrap();
        let mut cfg = SamplerConfig::for_support(&rho.support, 1.0);
        cfg.thin = 0;
        assert!(cfg.validate().is_err());
        let start = Configuration::from_1d(&[0.5, 3.0]).unwrap();
        assert!(ParticleSystem::new(start, rho.support, 0, 0).is_err());
    }
}
