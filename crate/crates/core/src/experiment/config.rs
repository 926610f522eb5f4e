//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated.
//! Keys not listed in [`KEYS`] are rejected, as are duplicates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::Dimension;
use crate::model::{BasisSet, Density, Support};
use crate::optimizer::{DualProblem, OptimizerConfig};
use crate::zero_temp::{MultistartConfig, StartStrategy};
use crate::{Error, Result};

/// Every key the parser accepts.
pub const KEYS: &[&str] = &[
    "dimension",
    "N",
    "beta",
    "M",
    "interval",
    "radius",
    "basis",
    "eta",
    "chains",
    "steps",
    "burn_in",
    "thin",
    "seed",
    "step_size",
    "momentum",
    "max_iters",
    "min_iters",
    "grad_tol",
    "project_delta_b",
    "n_starts",
    "alpha",
    "energy",
    "oracle",
    "grid_points",
    "output_dir",
];

const REQUIRED: &[&str] = &["dimension", "N", "beta", "M"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Segments,
    Shells,
}

/// Reference solution an experiment is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Exact comb potential of a 1D density.
    Comb,
    /// Exact potential and charge of two electrons in the unit ball.
    TwoElectron,
    /// Tabulated reference energies of uniform droplets in the unit ball.
    EnergyTable,
}

impl OracleKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "comb" => Some(Self::Comb),
            "two_electron" => Some(Self::TwoElectron),
            "energy_table" => Some(Self::EnergyTable),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Comb => "comb",
            Self::TwoElectron => "two_electron",
            Self::EnergyTable => "energy_table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub n: usize,
    /// Inverse temperatures, run in order with warm starts.
    pub betas: Vec<f64>,
    pub m: usize,
    /// 1D support; defaults to `[-N/2, N/2]`.
    pub interval: Option<(f64, f64)>,
    /// 3D support radius.
    pub radius: f64,
    pub basis: BasisKind,
    pub eta: Option<f64>,
    pub chains: Option<usize>,
    pub steps: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub seed: u64,
    pub step_size: Option<f64>,
    pub momentum: Option<f64>,
    pub max_iters: Option<usize>,
    pub min_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub project_delta_b: bool,
    pub n_starts: Option<usize>,
    pub alpha: Option<f64>,
    /// Evaluate `F_SCE` of the final charge.
    pub energy: bool,
    /// `None` picks whichever oracle applies to the density.
    pub oracle: Option<OracleKind>,
    pub grid_points: usize,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        for key in REQUIRED {
            if !entries.contains_key(*key) {
                return Err(Error::config(*key, "required key is missing"));
            }
        }
        let get = |key: &str| entries.get(key).map(String::as_str);

        let dimension: usize = scalar(&entries, "dimension")?.expect("required");
        Dimension::from_int(dimension).map_err(|_| Error::config("dimension", "must be 1 or 3"))?;
        let n: usize = scalar(&entries, "N")?.expect("required");
        let betas = list::<f64>("beta", get("beta").expect("required"))?;
        let m: usize = scalar(&entries, "M")?.expect("required");

        let interval = match get("interval") {
            None => None,
            Some(v) => match list::<f64>("interval", v)?.as_slice() {
                [a, b] => Some((*a, *b)),
                _ => return Err(Error::config("interval", "expected two numbers `a, b`")),
            },
        };
        let basis = match get("basis") {
            None if dimension == 1 => BasisKind::Segments,
            None => BasisKind::Shells,
            Some("segments") => BasisKind::Segments,
            Some("shells") => BasisKind::Shells,
            Some(other) => return Err(Error::config("basis", format!("unknown basis kind `{other}`"))),
        };
        let oracle = match get("oracle") {
            None | Some("auto") => None,
            Some(name) => Some(
                OracleKind::parse(name).ok_or_else(|| Error::config("oracle", format!("unknown oracle `{name}`")))?,
            ),
        };

        let cfg = Self {
            dimension,
            n,
            betas,
            m,
            interval,
            radius: scalar(&entries, "radius")?.unwrap_or(1.0),
            basis,
            eta: scalar(&entries, "eta")?,
            chains: scalar(&entries, "chains")?,
            steps: scalar(&entries, "steps")?,
            burn_in: scalar(&entries, "burn_in")?,
            thin: scalar(&entries, "thin")?,
            seed: scalar(&entries, "seed")?.unwrap_or(0),
            step_size: scalar(&entries, "step_size")?,
            momentum: scalar(&entries, "momentum")?,
            max_iters: scalar(&entries, "max_iters")?,
            min_iters: scalar(&entries, "min_iters")?,
            grad_tol: scalar(&entries, "grad_tol")?,
            project_delta_b: scalar(&entries, "project_delta_b")?.unwrap_or(false),
            n_starts: scalar(&entries, "n_starts")?,
            alpha: scalar(&entries, "alpha")?,
            energy: scalar(&entries, "energy")?.unwrap_or(true),
            oracle,
            grid_points: scalar(&entries, "grid_points")?.unwrap_or(201),
            output_dir: get("output_dir").map(PathBuf::from),
        };
        cfg.check()?;
        Ok(cfg)
    }

    /// Builds every numerical object once so that bad values surface as
    /// configuration errors before any sampling starts.
    fn check(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::config("beta", "empty schedule"));
        }
        if self.grid_points < 2 {
            return Err(Error::config("grid_points", "need at least 2 points"));
        }
        let problem = self.problem()?;
        for stage in 0..self.betas.len() {
            self.optimizer(&problem, stage)?;
        }
        self.multistart(&problem.rho)?.validate().map_err(as_config)?;
        Ok(())
    }

    pub fn dim(&self) -> Dimension {
        Dimension::from_int(self.dimension).expect("checked at parse time")
    }

    pub fn support(&self) -> Support {
        match self.dim() {
            Dimension::One => {
                let (a, b) = self.interval.unwrap_or((-(self.n as f64) / 2.0, self.n as f64 / 2.0));
                Support::Interval { a, b }
            }
            Dimension::Three => Support::Ball { radius: self.radius },
        }
    }

    pub fn density(&self) -> Result<Density> {
        let rho = match self.support() {
            Support::Interval { a, b } => Density::uniform_interval(self.n, a, b),
            Support::Ball { radius } => Density::uniform_ball(self.n, radius),
        };
        rho.map_err(as_config)
    }

    pub fn basis_set(&self) -> Result<BasisSet> {
        let basis = match (self.basis, self.support()) {
            (BasisKind::Segments, Support::Interval { a, b }) => BasisSet::segments(a, b, self.m),
            (BasisKind::Shells, Support::Ball { radius }) => BasisSet::shells(radius, self.m),
            _ => return Err(Error::config("basis", "basis kind does not match the dimension")),
        };
        basis.map_err(as_config)
    }

    pub fn problem(&self) -> Result<DualProblem> {
        DualProblem::new(self.density()?, self.basis_set()?).map_err(as_config)
    }

    /// Optimizer settings for one stage of the temperature schedule.
    pub fn optimizer(&self, problem: &DualProblem, stage: usize) -> Result<OptimizerConfig> {
        let beta = self.betas[stage];
        let mut cfg = OptimizerConfig::for_problem(problem, beta).map_err(as_config)?;
        let s = &mut cfg.sampler;
        if let Some(eta) = self.eta {
            s.eta = eta;
        }
        if let Some(chains) = self.chains {
            s.n_chains = chains;
        }
        if let Some(steps) = self.steps {
            s.n_steps = steps;
            s.burn_in = steps / 10;
        }
        if let Some(burn_in) = self.burn_in {
            s.burn_in = burn_in;
        }
        if let Some(thin) = self.thin {
            s.thin = thin;
        }
        if let Some(alpha) = self.alpha {
            s.alpha = alpha;
        }
        s.seed = stage_seed(self.seed, stage);
        if let Some(step) = self.step_size {
            cfg.step_size = step;
        }
        if let Some(momentum) = self.momentum {
            cfg.momentum = momentum;
        }
        if let Some(max_iters) = self.max_iters {
            cfg.max_iters = max_iters;
        }
        if let Some(min_iters) = self.min_iters {
            cfg.min_iters = min_iters;
        }
        if let Some(tol) = self.grad_tol {
            cfg.grad_tol = tol;
        }
        cfg.project_delta_b = self.project_delta_b;
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }

    pub fn multistart(&self, rho: &Density) -> Result<MultistartConfig> {
        let mut cfg = MultistartConfig::for_density(rho);
        if let Some(n) = self.n_starts {
            cfg.n_starts = n;
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        cfg.seed = self.seed;
        cfg.strategy = StartStrategy::Structured;
        cfg.validate().map_err(as_config)?;
        Ok(cfg)
    }

    /// The oracle named in the file, or the one that fits the density.
    pub fn resolved_oracle(&self) -> Option<OracleKind> {
        if self.oracle.is_some() {
            return self.oracle;
        }
        match self.support() {
            Support::Interval { .. } => Some(OracleKind::Comb),
            Support::Ball { radius } if radius == 1.0 && self.n == 2 => Some(OracleKind::TwoElectron),
            Support::Ball { radius } if radius == 1.0 && super::reference_energy(self.n).is_some() => {
                Some(OracleKind::EnergyTable)
            }
            Support::Ball { .. } => None,
        }
    }
}

/// Distinct sampler seed for each temperature stage.
fn stage_seed(seed: u64, stage: usize) -> u64 {
    seed ^ (stage as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

fn as_config(err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => Error::config(name, reason),
        other => other,
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(line, format!("line {}: expected `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        if value.is_empty() {
            return Err(Error::config(key, "empty value"));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
    }
    Ok(out)
}

fn scalar<T: std::str::FromStr>(entries: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    entries
        .get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
        })
        .transpose()
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<T>()
                .map_err(|_| Error::config(key, format!("cannot parse list item `{item}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = "dimension = 1\nN = 4\nbeta = 10\nM = 20   # ten per half\ninterval = -2, 2\n";

    #[test]
    fn parses_a_minimal_file() {
        let cfg = ExperimentConfig::parse(FIG3).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.betas, vec![10.0]);
        assert_eq!(cfg.interval, Some((-2.0, 2.0)));
        assert_eq!(cfg.basis, BasisKind::Segments);
        assert_eq!(cfg.resolved_oracle(), Some(OracleKind::Comb));
    }

    #[test]
    fn schedule_is_a_list() {
        let cfg = ExperimentConfig::parse("dimension=3\nN=2\nbeta=5, 20,50\nM=15").unwrap();
        assert_eq!(cfg.betas, vec![5.0, 20.0, 50.0]);
        assert_eq!(cfg.basis, BasisKind::Shells);
        assert_eq!(cfg.resolved_oracle(), Some(OracleKind::TwoElectron));
    }

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn missing_n_names_the_key() {
        let err = ExperimentConfig::parse("dimension = 1\nbeta = 10\nM = 20").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(key_of(err), "N");
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = ExperimentConfig::parse(&format!("{FIG3}temperature = 3\n")).unwrap_err();
        assert_eq!(key_of(err), "temperature");
        let err = ExperimentConfig::parse(&format!("{FIG3}N = 5\n")).unwrap_err();
        assert_eq!(key_of(err), "N");
    }

    #[test]
    fn bad_values_name_their_key() {
        let cases = [
            ("beta = -1", "beta"),
            ("momentum = 1.5", "momentum"),
            ("eta = abc", "eta"),
            ("basis = shells", "basis"),
            ("interval = 1", "interval"),
            ("chains = 0", "chains"),
        ];
        for (line, key) in cases {
            let text = FIG3
                .lines()
                .filter(|l| !l.starts_with(line.split('=').next().unwrap().trim()))
                .collect::<Vec<_>>()
                .join("\n");
            let err = ExperimentConfig::parse(&format!("{text}\n{line}\n")).unwrap_err();
            assert_eq!(key_of(err), key, "{line}");
        }
    }
}
