//! Configuration-driven experiments: run the whole pipeline from a config
//! file, write the results to disk, and check them against an oracle.

mod config;
mod format;

pub use config::{BasisKind, ExperimentConfig, OracleKind, KEYS};
pub use format::{to_json_17, write_json_17};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{point1, Point};
use crate::model::{BasisElement, BasisSet, Density, DualCharge, Potential, Support};
use crate::optimizer::nag_run;
use crate::oracles::{breakpoints, exact_1d_energy, exact_2e_shell_average, TwoElectronPotential};
use crate::zero_temp::e_n_omega;
use crate::{Error, Result};

/// Reference `F_SCE` of the uniform droplet of `n` electrons in the unit ball.
pub fn reference_energy(n: usize) -> Option<f64> {
    match n {
        2 => Some(0.670_008_374_914_365),
        3 => Some(2.327),
        4 => Some(4.935),
        5 => Some(8.626),
        10 => Some(43.140),
        14 => Some(90.808),
        20 => Some(196.198),
        30 => Some(463.807),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub beta: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nu: Vec<f64>,
    pub mass: f64,
    pub final_grad_norm: f64,
    pub final_std_error_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical form of the parsed configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

/// Deviations of a result from its oracle, after additive alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub oracle: OracleKind,
    /// Radial (3D) or linear (1D) window on which potentials are compared.
    pub window: (f64, f64),
    /// Constant added to `v[nu]` to best match the oracle in least squares.
    pub shift: Option<f64>,
    pub sup_deviation: Option<f64>,
    pub l2_deviation: Option<f64>,
    /// Worst relative deviation of the shell charge densities inside the charge window.
    pub shell_max_relative: Option<f64>,
    pub energy_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dimension: usize,
    pub n: usize,
    pub support: Support,
    pub basis: BasisSet,
    pub nu: Vec<f64>,
    pub mass: f64,
    pub iterations: usize,
    pub stages: Vec<StageResult>,
    pub f_sce: Option<f64>,
    /// Whether too many zero-temperature descents hit their iteration cap.
    pub f_sce_flagged: Option<bool>,
    pub grad_norm_trace: Vec<f64>,
    pub oracle: Option<OracleReport>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn charge(&self) -> Result<DualCharge> {
        DualCharge::new(std::sync::Arc::new(self.basis.clone()), self.nu.clone())
    }

    pub fn density(&self) -> Result<Density> {
        match self.support {
            Support::Interval { a, b } => Density::uniform_interval(self.n, a, b),
            Support::Ball { radius } => Density::uniform_ball(self.n, radius),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Command-line overrides of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub overwrite: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub output_dir: PathBuf,
    pub wall_clock_seconds: f64,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const POTENTIAL_FILE: &str = "potential.csv";
pub const CHARGE_FILE: &str = "charge.csv";

/// Runs the experiment described by the file at `path` and writes its artifacts.
pub fn run_experiment(path: &Path, options: &RunOptions) -> Result<ExperimentOutput> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = options.seed {
        cfg.seed = seed;
    }
    let output_dir = options
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            PathBuf::from("results").join(stem.unwrap_or_else(|| "experiment".into()))
        });
    if output_dir.exists() && !options.overwrite {
        return Err(Error::OutputExists(output_dir));
    }

    let start = Instant::now();
    let result = execute(&cfg)?;
    let wall_clock_seconds = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&output_dir)?;
    write_artifacts(&output_dir, &cfg, &result)?;
    std::fs::write(
        output_dir.join(TIMING_FILE),
        format!("{{\n  \"wall_clock_seconds\": {wall_clock_seconds:.3}\n}}\n"),
    )?;
    Ok(ExperimentOutput {
        result,
        output_dir,
        wall_clock_seconds,
    })
}

/// Runs the schedule and evaluates the result, without touching the disk.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let problem = cfg.problem()?;
    let mut charge = problem.zero_charge();
    let mut stages = Vec::with_capacity(cfg.betas.len());
    let mut trace = Vec::new();
    for (stage, &beta) in cfg.betas.iter().enumerate() {
        let opt = cfg.optimizer(&problem, stage)?;
        let state = nag_run(&charge, &problem, &opt)?;
        charge = problem.charge(state.nu.clone())?;
        trace.extend(state.history.iter().map(|h| h.grad_norm));
        let last = state.history.last();
        stages.push(StageResult {
            beta,
            iterations: state.iteration,
            converged: state.converged,
            nu: state.nu.clone(),
            mass: charge.mass(),
            final_grad_norm: last.map_or(f64::NAN, |h| h.grad_norm),
            final_std_error_norm: last.map_or(f64::NAN, |h| h.std_error_norm),
        });
    }

    let (f_sce, flagged) = if cfg.energy {
        let ms = cfg.multistart(&problem.rho)?;
        let e = e_n_omega(&charge, &problem.rho, &ms)?;
        (Some(e.value + problem.external_term(&charge)), Some(e.flagged))
    } else {
        (None, None)
    };

    let mut result = ExperimentResult {
        dimension: cfg.dimension,
        n: cfg.n,
        support: cfg.support(),
        basis: (*problem.basis).clone(),
        nu: charge.weights.clone(),
        mass: charge.mass(),
        iterations: stages.iter().map(|s| s.iterations).sum(),
        stages,
        f_sce,
        f_sce_flagged: flagged,
        grad_norm_trace: trace,
        oracle: None,
        provenance: Provenance {
            config_hash: config_hash(cfg)?,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    if let Some(kind) = cfg.resolved_oracle() {
        result.oracle = Some(oracle_report(&result, kind, cfg.grid_points)?);
    }
    Ok(result)
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    write_json_17(&dir.join(SUMMARY_FILE), result)?;
    let charge = result.charge()?;
    let oracle = result.oracle.as_ref().map(|r| r.oracle);

    let lo = match result.support {
        Support::Interval { a, .. } => a,
        Support::Ball { .. } => 0.0,
    };
    let hi = match result.support {
        Support::Interval { b, .. } => b,
        Support::Ball { radius } => radius,
    };
    let grid = linspace(lo, hi, cfg.grid_points);
    let stage_charges: Vec<DualCharge> = result
        .stages
        .iter()
        .map(|s| charge.with_weights(s.nu.clone()))
        .collect::<Result<_>>()?;
    let curve = oracle_curve(result, oracle)?;
    let shift = result.oracle.as_ref().and_then(|r| r.shift).unwrap_or(0.0);

    let mut csv = String::from("r,v");
    for s in &result.stages {
        csv.push_str(&format!(",v_beta_{}", s.beta));
    }
    if curve.is_some() {
        csv.push_str(",oracle,deviation");
    }
    csv.push('\n');
    for &r in &grid {
        let p = on_axis(result.dimension, r);
        let v = charge.value(p);
        csv.push_str(&format!("{},{}", num(r), num(v)));
        for c in &stage_charges {
            csv.push_str(&format!(",{}", num(c.value(p))));
        }
        if let Some(exact) = &curve {
            let o = exact.value(p);
            csv.push_str(&format!(",{},{}", num(o), num(v + shift - o)));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join(POTENTIAL_FILE), csv)?;

    let two_electron = oracle == Some(OracleKind::TwoElectron);
    let mut csv = String::from("element,lower,upper,weight,charge");
    if two_electron {
        csv.push_str(",oracle,relative_deviation");
    }
    csv.push('\n');
    for (i, (w, e)) in result.nu.iter().zip(&result.basis.elements).enumerate() {
        let (a, b) = e.extent();
        csv.push_str(&format!("{i},{},{},{},{}", num(a), num(b), num(*w), num(w * e.mass())));
        if two_electron {
            let exact = exact_2e_shell_average(a, b)?;
            csv.push_str(&format!(",{},{}", num(exact), num((w - exact) / exact)));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join(CHARGE_FILE), csv)?;
    Ok(())
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn on_axis(dimension: usize, r: f64) -> Point {
    if dimension == 1 {
        point1(r)
    } else {
        [r, 0.0, 0.0]
    }
}

/// Exact potential curve of an oracle, where one exists.
fn oracle_curve(result: &ExperimentResult, oracle: Option<OracleKind>) -> Result<Option<Box<dyn Potential>>> {
    Ok(match oracle {
        Some(OracleKind::Comb) => Some(Box::new(breakpoints(&result.density()?)?)),
        Some(OracleKind::TwoElectron) => Some(Box::new(TwoElectronPotential::new(0.5, 4000)?)),
        _ => None,
    })
}

/// Additive constant minimizing `sum_k (v_k + c - o_k)^2`, with the sup and
/// trapezoidal L² norms of the aligned difference.
pub fn align(grid: &[f64], v: &[f64], oracle: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let shift = oracle.iter().zip(v).map(|(o, v)| o - v).sum::<f64>() / n;
    let d: Vec<f64> = v.iter().zip(oracle).map(|(v, o)| v + shift - o).collect();
    let sup = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l2 = grid
        .windows(2)
        .zip(d.windows(2))
        .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] * d[0] + d[1] * d[1]))
        .sum::<f64>()
        .sqrt();
    (shift, sup, l2)
}

fn check_oracle(result: &ExperimentResult, kind: OracleKind) -> Result<()> {
    let ok = match (kind, result.support) {
        (OracleKind::Comb, Support::Interval { .. }) => true,
        (OracleKind::TwoElectron, Support::Ball { radius }) => result.n == 2 && radius == 1.0,
        (OracleKind::EnergyTable, Support::Ball { radius }) => radius == 1.0 && reference_energy(result.n).is_some(),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "oracle `{}` does not apply to N={} on {:?}",
            kind.name(),
            result.n,
            result.support
        )))
    }
}

/// Compares a result with an oracle.
pub fn oracle_report(result: &ExperimentResult, kind: OracleKind, grid_points: usize) -> Result<OracleReport> {
    check_oracle(result, kind)?;
    let charge = result.charge()?;
    let mut report = OracleReport {
        oracle: kind,
        window: (0.0, 0.0),
        shift: None,
        sup_deviation: None,
        l2_deviation: None,
        shell_max_relative: None,
        energy_reference: None,
    };
    match kind {
        OracleKind::Comb => {
            let rho = result.density()?;
            if let Support::Interval { a, b } = result.support {
                report.window = (a, b);
            }
            report.energy_reference = Some(exact_1d_energy(&rho)?);
        }
        OracleKind::TwoElectron => {
            report.window = (0.1, 0.9);
            report.energy_reference = reference_energy(2);
            let mut worst = 0.0f64;
            for (w, e) in result.nu.iter().zip(&result.basis.elements) {
                if let BasisElement::Shell { inner, outer } = *e {
                    if outer > 0.1 && inner < 0.8 {
                        let exact = exact_2e_shell_average(inner, outer)?;
                        worst = worst.max(((w - exact) / exact).abs());
                    }
                }
            }
            report.shell_max_relative = Some(worst);
        }
        OracleKind::EnergyTable => {
            report.energy_reference = reference_energy(result.n);
        }
    }
    if let Some(curve) = oracle_curve(result, Some(kind))? {
        let grid = linspace(report.window.0, report.window.1, grid_points.max(2));
        let v: Vec<f64> = grid.iter().map(|&r| charge.value(on_axis(result.dimension, r))).collect();
        let o: Vec<f64> = grid.iter().map(|&r| curve.value(on_axis(result.dimension, r))).collect();
        let (shift, sup, l2) = align(&grid, &v, &o);
        report.shift = Some(shift);
        report.sup_deviation = Some(sup);
        report.l2_deviation = Some(l2);
    }
    Ok(report)
}

/// Thresholds applied by [`validate`]. `None` skips a check.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub sup: Option<f64>,
    pub l2: Option<f64>,
    pub shell_relative: Option<f64>,
    /// `(target, tolerance)` for the total charge mass.
    pub mass: Option<(f64, f64)>,
    /// `F_SCE` must lie in `[lo * ref, hi * ref]`.
    pub energy_band: Option<(f64, f64)>,
}

impl Tolerances {
    pub fn for_oracle(kind: OracleKind, n: usize) -> Self {
        let none = Self {
            sup: None,
            l2: None,
            shell_relative: None,
            mass: None,
            energy_band: None,
        };
        match kind {
            OracleKind::Comb => Self {
                sup: Some(0.15),
                mass: Some((n as f64 - 1.0, 0.15)),
                ..none
            },
            OracleKind::TwoElectron => Self {
                sup: Some(0.1),
                shell_relative: Some(0.2),
                mass: Some((1.0, 0.1)),
                ..none
            },
            OracleKind::EnergyTable => Self {
                energy_band: Some((0.95, 1.005)),
                ..none
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub oracle: OracleKind,
    pub report: OracleReport,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict} {:<16} {:>12.6} ({})", c.name, c.value, c.threshold)?;
        }
        Ok(())
    }
}

/// Recomputes the oracle comparison for a stored result and applies `tol`.
pub fn validate(result_path: &Path, kind: OracleKind, tol: &Tolerances, grid_points: usize) -> Result<ValidationReport> {
    let path = if result_path.is_dir() {
        result_path.join(SUMMARY_FILE)
    } else {
        result_path.to_path_buf()
    };
    let result = ExperimentResult::load(&path)?;
    validate_result(&result, kind, tol, grid_points)
}

pub fn validate_result(
    result: &ExperimentResult,
    kind: OracleKind,
    tol: &Tolerances,
    grid_points: usize,
) -> Result<ValidationReport> {
    let report = oracle_report(result, kind, grid_points)?;
    let mut checks = Vec::new();
    let mut upper = |name: &str, value: Option<f64>, limit: Option<f64>| {
        if let (Some(value), Some(limit)) = (value, limit) {
            checks.push(Check {
                name: name.into(),
                value,
                threshold: format!("<= {limit}"),
                passed: value <= limit,
            });
        }
    };
    upper("sup_deviation", report.sup_deviation, tol.sup);
    upper("l2_deviation", report.l2_deviation, tol.l2);
    upper("shell_relative", report.shell_max_relative, tol.shell_relative);
    if let Some((target, width)) = tol.mass {
        checks.push(Check {
            name: "mass".into(),
            value: result.mass,
            threshold: format!("{target} +- {width}"),
            passed: (result.mass - target).abs() <= width,
        });
    }
    if let Some((lo, hi)) = tol.energy_band {
        let reference = report.energy_reference.ok_or_else(|| Error::Unsupported("no reference energy".into()))?;
        let value = result
            .f_sce
            .ok_or_else(|| Error::Unsupported("result has no F_SCE (run with energy = true)".into()))?;
        let (a, b) = (lo * reference, hi * reference);
        checks.push(Check {
            name: "f_sce".into(),
            value,
            threshold: format!("in [{a:.6}, {b:.6}]"),
            passed: (a..=b).contains(&value),
        });
    }
    Ok(ValidationReport {
        oracle: kind,
        report,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Dimension;

    #[test]
    fn alignment_of_identical_curves_is_exact() {
        let grid = linspace(-2.0, 2.0, 101);
        let comb = breakpoints(&Density::uniform_interval(4, -2.0, 2.0).unwrap()).unwrap();
        let v: Vec<f64> = grid.iter().map(|&x| comb.value(point1(x))).collect();
        let (shift, sup, l2) = align(&grid, &v, &v);
        assert_eq!((shift, sup, l2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn alignment_removes_a_constant() {
        let grid = linspace(-2.0, 2.0, 101);
        let o: Vec<f64> = grid.iter().map(|x| -(x + 1.0f64).abs() - x.abs() - (x - 1.0f64).abs()).collect();
        let v: Vec<f64> = o.iter().map(|x| x - 7.25).collect();
        let (shift, sup, l2) = align(&grid, &v, &o);
        assert!((shift - 7.25).abs() < 1e-12);
        assert!(sup < 1e-12 && l2 < 1e-12);
    }

    fn exact_comb_result() -> ExperimentResult {
        // segments of width 1e-4 around the breakpoints approximate the comb
        let eps = 1e-4;
        let mut elements = Vec::new();
        for c in [-1.0, 0.0, 1.0] {
            elements.push(BasisElement::Segment {
                a: c - eps / 2.0,
                b: c + eps / 2.0,
            });
        }
        let basis = BasisSet::new(elements).unwrap();
        let cfg = ExperimentConfig::parse("dimension=1\nN=4\nbeta=10\nM=4\ninterval=-2,2").unwrap();
        ExperimentResult {
            dimension: 1,
            n: 4,
            support: Support::Interval { a: -2.0, b: 2.0 },
            basis,
            nu: vec![1.0 / eps; 3],
            mass: 3.0,
            iterations: 0,
            stages: vec![],
            f_sce: Some(-10.0),
            f_sce_flagged: Some(false),
            grad_norm_trace: vec![],
            oracle: None,
            provenance: Provenance {
                config_hash: config_hash(&cfg).unwrap(),
                seed: 0,
                version: "test".into(),
            },
        }
    }

    #[test]
    fn narrow_segments_at_the_breakpoints_validate_against_the_comb() {
        let result = exact_comb_result();
        let tol = Tolerances::for_oracle(OracleKind::Comb, 4);
        let report = validate_result(&result, OracleKind::Comb, &tol, 401).unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.report.sup_deviation.unwrap() < 1e-4);
        assert_eq!(report.report.energy_reference, Some(-10.0));
    }

    #[test]
    fn wrong_oracle_is_unsupported() {
        let result = exact_comb_result();
        let tol = Tolerances::for_oracle(OracleKind::TwoElectron, 2);
        assert!(validate_result(&result, OracleKind::TwoElectron, &tol, 11).is_err());
    }

    #[test]
    fn summary_round_trips_exactly() {
        let mut result = exact_comb_result();
        result.nu = vec![0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-300];
        result.grad_norm_trace = vec![1e308, 5e-324, 0.30000000000000004];
        let text = to_json_17(&result).unwrap();
        let back: ExperimentResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, result);
        assert_eq!(to_json_17(&back).unwrap(), text);
    }

    #[test]
    fn reference_table() {
        assert_eq!(reference_energy(3), Some(2.327));
        assert_eq!(reference_energy(6), None);
        assert!(Dimension::from_int(2).is_err());
    }
}
