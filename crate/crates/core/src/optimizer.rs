//! Stochastic dual ascent on the weights `nu`.
//!
//! The objective is `G[nu] = F_beta(v[nu]) + int v[nu] rho`, with
//! `F_beta(v) = -beta^{-1} ln z_beta(v)`. Its gradient is
//! `dG/dnu_i = D(rho_i, rho) - D(rho_i, rho[nu])`, where the second term is a
//! Gibbs-ensemble average estimated by the sampler. The ascent uses Nesterov's
//! accelerated gradient with a fixed step, since `G` itself is too expensive
//! for line searches.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Configuration;
use crate::kernels::truncated_cost;
use crate::model::{basis_moments, coulomb_energy, BasisSet, Density, DualCharge, Potential};
use crate::sampler::{estimate_moments, SamplerConfig};
use crate::{Error, Result};

/// Norm of `nu` above which the ascent is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Basis and target density with the precomputed table `D(rho_i, rho)`.
#[derive(Debug, Clone)]
pub struct DualProblem {
    pub rho: Density,
    pub basis: Arc<BasisSet>,
    pub moments: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DualProblem {
    pub fn new(rho: Density, basis: BasisSet) -> Result<Self> {
        basis.check_within(&rho.support)?;
        let moments = basis_moments(&basis, &rho)?;
        let masses = basis.masses();
        Ok(Self {
            rho,
            basis: Arc::new(basis),
            moments,
            masses,
        })
    }

    pub fn zero_charge(&self) -> DualCharge {
        DualCharge::zeros(self.basis.clone())
    }

    pub fn charge(&self, weights: Vec<f64>) -> Result<DualCharge> {
        DualCharge::new(self.basis.clone(), weights)
    }

    /// `int v[nu] rho`.
    pub fn external_term(&self, charge: &DualCharge) -> f64 {
        crate::model::external_term_from_table(charge, &self.moments)
    }

    /// `dG/dnu` with Monte-Carlo standard errors.
    pub fn gradient(&self, charge: &DualCharge, cfg: &SamplerConfig) -> Result<GradientEstimate> {
        let est = estimate_moments(charge, &self.rho, cfg)?;
        Ok(GradientEstimate {
            values: self
                .moments
                .iter()
                .zip(&est.values)
                .map(|(d, m)| d - m)
                .collect(),
            std_errors: est.std_errors,
        })
    }

    /// `0.5 / max_i sum_j |D(rho_i, rho_j)|`.
    pub fn default_step_size(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for a in &self.basis.elements {
            let mut row = 0.0;
            for b in &self.basis.elements {
                row += coulomb_energy(a, b)?.abs();
            }
            worst = worst.max(row);
        }
        if worst == 0.0 {
            return Err(Error::param("basis", "degenerate energy matrix"));
        }
        Ok(0.5 / worst)
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
    pub fn std_error_norm(&self) -> f64 {
        norm2(&self.std_errors)
    }
}

/// Anything that can produce a (noisy) gradient of `G` at `nu`.
pub trait GradientSource {
    fn gradient(&mut self, charge: &DualCharge, iteration: usize) -> Result<GradientEstimate>;
}

/// Sampler-backed gradient with a fresh seed per iteration.
pub struct SampledGradient<'a> {
    pub problem: &'a DualProblem,
    pub sampler: SamplerConfig,
}

impl GradientSource for SampledGradient<'_> {
    fn gradient(&mut self, charge: &DualCharge, iteration: usize) -> Result<GradientEstimate> {
        let mut cfg = self.sampler.clone();
        cfg.seed = iteration_seed(self.sampler.seed, iteration);
        self.problem.gradient(charge, &cfg)
    }
}

/// Seed of the sampler at a given outer iteration.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    seed.wrapping_add((iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

impl<F> GradientSource for F
where
    F: FnMut(&DualCharge, usize) -> Result<GradientEstimate>,
{
    fn gradient(&mut self, charge: &DualCharge, iteration: usize) -> Result<GradientEstimate> {
        self(charge, iteration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub momentum: f64,
    pub max_iters: usize,
    /// The noise-based stopping test is skipped before this many iterations.
    pub min_iters: usize,
    pub grad_tol: f64,
    pub project_delta_b: bool,
    pub sampler: SamplerConfig,
}

impl OptimizerConfig {
    /// Default step from [`DualProblem::default_step_size`], momentum 0.9.
    pub fn for_problem(problem: &DualProblem, beta: f64) -> Result<Self> {
        Ok(Self {
            step_size: problem.default_step_size()?,
            momentum: 0.9,
            max_iters: 500,
            min_iters: 0,
            grad_tol: 0.0,
            project_delta_b: false,
            sampler: SamplerConfig::for_support(&problem.rho.support, beta),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::param("step_size", format!("{} must be positive", self.step_size)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param("momentum", format!("{} must lie in [0, 1)", self.momentum)));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::param("grad_tol", "must be non-negative"));
        }
        self.sampler.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub grad_norm: f64,
    pub mass: f64,
    pub std_error_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Current iterate; at convergence, the point where the last gradient was taken.
    pub nu: Vec<f64>,
    /// Previous iterate, for the momentum look-ahead.
    pub previous: Vec<f64>,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub last_gradient: Option<GradientEstimate>,
}

/// Euclidean projection onto `{nu >= 0, sum_i nu_i m_i <= cap}`.
pub fn project_delta_b(nu: &[f64], masses: &[f64], cap: f64) -> Vec<f64> {
    let clamp = |lambda: f64| -> Vec<f64> {
        nu.iter()
            .zip(masses)
            .map(|(x, m)| (x - lambda * m).max(0.0))
            .collect()
    };
    let mass = |v: &[f64]| v.iter().zip(masses).map(|(x, m)| x * m).sum::<f64>();
    let base = clamp(0.0);
    if mass(&base) <= cap {
        return base;
    }
    // mass(clamp(lambda)) is continuous and non-increasing in lambda
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(&clamp(hi)) > cap {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(&clamp(mid)) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clamp(hi)
}

/// Nesterov ascent with the sampler-backed gradient.
pub fn nag_run(initial: &DualCharge, problem: &DualProblem, cfg: &OptimizerConfig) -> Result<OptimizerState> {
    let mut source = SampledGradient {
        problem,
        sampler: cfg.sampler.clone(),
    };
    nag_run_with(initial, problem, cfg, &mut source, |_, _| Ok(()))
}

/// Nesterov ascent with an arbitrary gradient source. `observer` sees every
/// new iterate.
pub fn nag_run_with<S, O>(
    initial: &DualCharge,
    problem: &DualProblem,
    cfg: &OptimizerConfig,
    source: &mut S,
    mut observer: O,
) -> Result<OptimizerState>
where
    S: GradientSource + ?Sized,
    O: FnMut(usize, &DualCharge) -> Result<()>,
{
    cfg.validate()?;
    let cap = problem.rho.n as f64 - 1.0;
    let mut state = OptimizerState {
        nu: initial.weights.clone(),
        previous: initial.weights.clone(),
        iteration: 0,
        history: Vec::new(),
        converged: false,
        last_gradient: None,
    };
    if cfg.project_delta_b {
        state.nu = project_delta_b(&state.nu, &problem.masses, cap);
        state.previous = state.nu.clone();
    }
    while state.iteration < cfg.max_iters {
        let lookahead: Vec<f64> = state
            .nu
            .iter()
            .zip(&state.previous)
            .map(|(x, p)| x + cfg.momentum * (x - p))
            .collect();
        let charge = problem.charge(lookahead.clone())?;
        let grad = source.gradient(&charge, state.iteration)?;
        state.iteration += 1;
        let (gn, sn) = (grad.norm(), grad.std_error_norm());
        state.history.push(IterationRecord {
            grad_norm: gn,
            mass: charge.mass(),
            std_error_norm: sn,
        });
        if state.iteration >= cfg.min_iters && gn <= cfg.grad_tol.max(3.0 * sn) {
            state.previous = state.nu.clone();
            state.nu = lookahead;
            state.converged = true;
            state.last_gradient = Some(grad);
            break;
        }
        let mut next: Vec<f64> = lookahead
            .iter()
            .zip(&grad.values)
            .map(|(y, g)| y + cfg.step_size * g)
            .collect();
        if cfg.project_delta_b {
            next = project_delta_b(&next, &problem.masses, cap);
        }
        let norm = norm2(&next);
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged {
                iteration: state.iteration,
                norm,
            });
        }
        state.previous = std::mem::replace(&mut state.nu, next);
        state.last_gradient = Some(grad);
        observer(state.iteration, &problem.charge(state.nu.clone())?)?;
    }
    Ok(state)
}

/// Importance-sampling estimate of `F_beta(v) = -beta^{-1} ln z_beta(v)`
/// from uniform `mu^{⊗N}` samples, with its delta-method standard error.
pub fn free_energy_estimate<P: Potential + ?Sized>(
    potential: &P,
    rho: &Density,
    beta: f64,
    n_samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let logw = log_weights(potential, rho, beta, n_samples, seed, alpha)?;
    let (f, se, _) = free_energy_from_log_weights(&logw, beta)?;
    Ok((f, se))
}

/// Paired estimate of `F_beta(v_b) - F_beta(v_a)` on common samples; the
/// standard error accounts for the correlation between the two.
pub fn free_energy_difference<A, B>(
    a: &A,
    b: &B,
    rho: &Density,
    beta: f64,
    n_samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<(f64, f64)>
where
    A: Potential + ?Sized,
    B: Potential + ?Sized,
{
    let la = log_weights(a, rho, beta, n_samples, seed, alpha)?;
    let lb = log_weights(b, rho, beta, n_samples, seed, alpha)?;
    let (fa, _, wa) = free_energy_from_log_weights(&la, beta)?;
    let (fb, _, wb) = free_energy_from_log_weights(&lb, beta)?;
    // influence of sample k on ln(mean w_b) - ln(mean w_a)
    let n = n_samples as f64;
    let ma = wa.iter().sum::<f64>() / n;
    let mb = wb.iter().sum::<f64>() / n;
    let psi: Vec<f64> = wa.iter().zip(&wb).map(|(x, y)| y / mb - x / ma).collect();
    let mean = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((fb - fa, (var / n).sqrt() / beta))
}

fn log_weights<P: Potential + ?Sized>(
    potential: &P,
    rho: &Density,
    beta: f64,
    n_samples: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<f64>> {
    if n_samples < 2 {
        return Err(Error::param("n_samples", "need at least 2 samples"));
    }
    if !rho.is_uniform() {
        return Err(Error::Unsupported("free energy needs a uniform density".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(rho.n);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        positions.clear();
        positions.extend((0..rho.n).map(|_| rho.support.sample_uniform(&mut rng)));
        let config = Configuration {
            dim: rho.dim(),
            positions: positions.clone(),
        };
        let h = truncated_cost(&config, alpha) - positions.iter().map(|p| potential.value(*p)).sum::<f64>();
        out.push(-beta * h);
    }
    Ok(out)
}

/// Returns (F, se, weights scaled by exp(-max log w)).
fn free_energy_from_log_weights(logw: &[f64], beta: f64) -> Result<(f64, f64, Vec<f64>)> {
    let n = logw.len() as f64;
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    let ess = sum * sum / sum_sq;
    if !(ess >= 10.0) {
        return Err(Error::DegenerateWeights { ess });
    }
    let mean = sum / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let f = -(top + mean.ln()) / beta;
    let se = (var / n).sqrt() / (mean * beta);
    Ok((f, se, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn projection_examples() {
        let masses = [1.0, 2.0, 1.0];
        assert_eq!(project_delta_b(&[0.5, -1.0, 0.2], &masses, 3.0), vec![0.5, 0.0, 0.2]);
        let p = project_delta_b(&[3.0, 3.0, 3.0], &masses, 3.0);
        let mass: f64 = p.iter().zip(&masses).map(|(x, m)| x * m).sum();
        assert!((mass - 3.0).abs() < 1e-9);
        assert!(p.iter().all(|x| *x >= 0.0));
    }

    fn two_electron_problem(m: usize) -> DualProblem {
        let rho = Density::uniform_interval(2, -1.0, 1.0).unwrap();
        DualProblem::new(rho, BasisSet::segments(-1.0, 1.0, m).unwrap()).unwrap()
    }

    #[test]
    fn zero_gradient_never_moves() {
        let problem = two_electron_problem(3);
        let mut cfg = OptimizerConfig::for_problem(&problem, 1.0).unwrap();
        cfg.min_iters = 5;
        cfg.max_iters = 5;
        let start = problem.charge(vec![0.3, 0.1, 0.7]).unwrap();
        let mut zero = |_: &DualCharge, _: usize| {
            Ok(GradientEstimate {
                values: vec![0.0; 3],
                std_errors: vec![0.0; 3],
            })
        };
        let state = nag_run_with(&start, &problem, &cfg, &mut zero, |_, _| Ok(())).unwrap();
        assert_eq!(state.iteration, 5);
        assert_eq!(state.nu, start.weights);
    }

    #[test]
    fn momentum_zero_is_plain_gradient_ascent() {
        let problem = two_electron_problem(3);
        let mut cfg = OptimizerConfig::for_problem(&problem, 1.0).unwrap();
        cfg.momentum = 0.0;
        cfg.step_size = 0.3;
        cfg.grad_tol = 0.0;
        cfg.max_iters = 20;
        let target = [1.0, -0.5, 2.0];
        let mut quadratic = |c: &DualCharge, _: usize| {
            Ok(GradientEstimate {
                values: c.weights.iter().zip(&target).map(|(x, t)| t - x).collect(),
                std_errors: vec![0.0; 3],
            })
        };
        let state = nag_run_with(&problem.zero_charge(), &problem, &cfg, &mut quadratic, |_, _| Ok(())).unwrap();
        let mut x = vec![0.0; 3];
        for _ in 0..20 {
            x = x.iter().zip(&target).map(|(x, t)| x + 0.3 * (t - x)).collect();
        }
        assert_eq!(state.nu, x);
    }

    #[test]
    fn high_temperature_gradient_vanishes() {
        let problem = two_electron_problem(4);
        let mut sampler = SamplerConfig::for_support(&problem.rho.support, 1e-6);
        sampler.n_steps = 40_000;
        sampler.seed = 3;
        let g = problem.gradient(&problem.zero_charge(), &sampler).unwrap();
        for (v, se) in g.values.iter().zip(&g.std_errors) {
            assert!(v.abs() <= 3.0 * se + 1e-12, "{v} vs se {se}");
        }
    }

    #[test]
    fn optimum_is_stationary() {
        let problem = two_electron_problem(1);
        let mut cfg = OptimizerConfig::for_problem(&problem, 2.0).unwrap();
        cfg.sampler.n_steps = 40_000;
        cfg.sampler.seed = 8;
        cfg.max_iters = 300;
        let state = nag_run(&problem.zero_charge(), &problem, &cfg).unwrap();
        assert!(state.converged);
        let mut fresh = cfg.sampler.clone();
        fresh.seed = 99;
        let g = problem.gradient(&problem.charge(state.nu).unwrap(), &fresh).unwrap();
        assert!(g.values[0].abs() <= 3.0 * g.std_errors[0], "{:?}", g);
    }

    #[test]
    fn free_energy_at_high_temperature_is_mean_cost() {
        let rho = Density::uniform_interval(3, -1.0, 1.0).unwrap();
        let zero = DualCharge::zeros(Arc::new(BasisSet::segments(-1.0, 1.0, 2).unwrap()));
        let (f, _) = free_energy_estimate(&zero, &rho, 1e-6, 20_000, 4, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut total = 0.0;
        for _ in 0..20_000 {
            let xs: Vec<Point> = (0..3).map(|_| rho.support.sample_uniform(&mut rng)).collect();
            total += truncated_cost(&Configuration { dim: rho.dim(), positions: xs }, 1e-3);
        }
        assert!((f - total / 20_000.0).abs() < 1e-6, "{f} vs {}", total / 20_000.0);
    }

    #[test]
    fn free_energy_is_seed_deterministic() {
        let rho = Density::uniform_interval(2, -1.0, 1.0).unwrap();
        let nu = DualCharge::new(Arc::new(BasisSet::segments(-1.0, 1.0, 2).unwrap()), vec![0.4, 0.2]).unwrap();
        let a = free_energy_estimate(&nu, &rho, 3.0, 1000, 17, 1e-3).unwrap();
        let b = free_energy_estimate(&nu, &rho, 3.0, 1000, 17, 1e-3).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn config_validation() {
        let rho = Density::uniform_interval(2, -1.0, 1.0).unwrap();
        let problem = DualProblem::new(rho, BasisSet::segments(-1.0, 1.0, 2).unwrap()).unwrap();
        let mut cfg = OptimizerConfig::for_problem(&problem, 1.0).unwrap();
        assert!(cfg.validate().is_ok());
        cfg.momentum = 1.0;
        assert!(cfg.validate().is_err());
    }
}
