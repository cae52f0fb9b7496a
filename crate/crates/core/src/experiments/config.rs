//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # logistic, normal covariates
//! model = logistic
//! n = 10000
//! covariates = 9
//! law = normal
//! methods = optR, uniR, optP_inf, optP_b, uniP
//! ratios = 0.02, 0.1, 0.5
//! alpha = 0.1
//! s0_fraction = 0.01
//! b = 5
//! replicates = 200
//! seed = 7
//! ```
//!
//! Keys: `model`, `n`, `covariates`, `law`, `theta` (`default` or a comma
//! list, intercept first), `data` (CSV path, replaces the generator),
//! `response`, `trials`, `methods`, `ratios`, `alpha`, `s0_fraction`, `b`,
//! `replicates`, `seed`, `output`, `threads`, `timing`. A ratio is the total
//! fraction `(s₀ + s)/n` drawn by both stages.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::generate::{CovariateLaw, GeneratorSpec, ModelKind, ThetaRule};
use super::mse::Method;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    pub covariates: usize,
    pub law: CovariateLaw,
    pub theta: ThetaRule,
    pub data: Option<PathBuf>,
    pub response: String,
    pub trials: Option<String>,
    pub methods: Vec<Method>,
    pub ratios: Vec<f64>,
    pub alpha: f64,
    pub s0_fraction: f64,
    pub b: f64,
    pub replicates: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Logistic,
            n: 10_000,
            covariates: 9,
            law: CovariateLaw::Normal,
            theta: ThetaRule::Halves,
            data: None,
            response: "y".into(),
            trials: None,
            methods: Method::ALL.to_vec(),
            ratios: vec![0.02, 0.05, 0.1, 0.2, 0.5],
            alpha: 0.1,
            s0_fraction: 0.01,
            b: 5.0,
            replicates: 200,
            seed: 0,
            output: None,
            threads: None,
            timing: false,
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidArgument(format!("invalid value '{value}' for key '{key}'"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 18] = [
        "model",
        "n",
        "covariates",
        "law",
        "theta",
        "data",
        "response",
        "trials",
        "methods",
        "ratios",
        "alpha",
        "s0_fraction",
        "b",
        "replicates",
        "seed",
        "output",
        "threads",
        "timing",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut model_set = false;
        let mut covariates_set = false;
        let mut theta_set = false;
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                reason: format!("expected 'key = value', found '{line}'"),
            })?;
            let key = key.trim();
            cfg.set(key, value.trim())?;
            model_set |= key == "model";
            covariates_set |= key == "covariates";
            theta_set |= key == "theta";
        }
        if model_set {
            cfg.apply_model_defaults(covariates_set, theta_set);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Linear models default to 20 covariates and unit coefficients.
    pub fn apply_model_defaults(&mut self, covariates_set: bool, theta_set: bool) {
        if !covariates_set {
            self.covariates = match self.model {
                ModelKind::Linear => 20,
                ModelKind::Logistic => 9,
            };
        }
        if !theta_set {
            self.theta = match self.model {
                ModelKind::Linear => ThetaRule::Ones,
                ModelKind::Logistic => ThetaRule::Halves,
            };
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "n" => self.n = num(key, value)?,
            "covariates" => self.covariates = num(key, value)?,
            "law" => self.law = value.parse()?,
            "theta" => {
                self.theta = if value == "default" {
                    match self.model {
                        ModelKind::Linear => ThetaRule::Ones,
                        ModelKind::Logistic => ThetaRule::Halves,
                    }
                } else {
                    ThetaRule::Custom(list(key, value)?)
                }
            }
            "data" => self.data = Some(PathBuf::from(value)),
            "response" => self.response = value.into(),
            "trials" => self.trials = Some(value.into()),
            "methods" => {
                self.methods = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "ratios" => self.ratios = list(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "s0_fraction" => self.s0_fraction = num(key, value)?,
            "b" => self.b = num(key, value)?,
            "replicates" => self.replicates = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(num(key, value)?),
            "timing" => self.timing = num(key, value)?,
            other => return Err(Error::InvalidArgument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be ≥ 1".into()));
        }
        if self.methods.is_empty() || self.ratios.is_empty() {
            return Err(Error::InvalidArgument("methods and ratios must be non-empty".into()));
        }
        if !(self.s0_fraction > 0.0 && self.s0_fraction < 1.0) {
            return Err(Error::InvalidArgument("s0_fraction must lie in (0, 1)".into()));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > self.s0_fraction && **r < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "ratio {r} must lie in ({}, 1)",
                self.s0_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(self.b >= 1.0) {
            return Err(Error::InvalidArgument("alpha must lie in [0, 1] and b must be ≥ 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn generator(&self) -> GeneratorSpec {
        GeneratorSpec {
            model: self.model,
            n: self.n,
            covariates: self.covariates,
            law: self.law,
            theta: self.theta.clone(),
        }
    }
}
