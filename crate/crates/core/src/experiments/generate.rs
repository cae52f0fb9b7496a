//! Synthetic regression data with equicorrelated covariates.
//!
//! Covariates are built from `v = C z` where `C` is the Cholesky factor of
//! `Σ` (`Σᵢⱼ = 0.5` off the diagonal, `1` on it) and `z` is standard normal.
//! The normal law uses `v`, the lognormal law `exp(v)` element-wise and the
//! `t(ν)` law `v / √(W/ν)` with `W ~ χ²_ν`. `W` is drawn by inverting the
//! χ² distribution function at a uniform, so datasets that share a seed but
//! differ in `ν` share `z`, the uniforms and the noise.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::model::sigmoid;
use crate::numeric;
use crate::sampling::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Logistic,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
        }
    }

    pub fn family(&self) -> crate::model::Family {
        match self {
            ModelKind::Linear => crate::model::Family::Ols,
            ModelKind::Logistic => crate::model::Family::Logistic,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" | "ols" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            other => Err(Error::InvalidArgument(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateLaw {
    Normal,
    LogNormal,
    /// Multivariate t with the given degrees of freedom.
    T(f64),
}

impl CovariateLaw {
    /// Display name: `normal`, `lognormal`, `t3`, `t2.5`.
    pub fn name(&self) -> String {
        match self {
            CovariateLaw::Normal => "normal".into(),
            CovariateLaw::LogNormal => "lognormal".into(),
            CovariateLaw::T(nu) => format!("t{nu}"),
        }
    }
}

impl fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "normal" => Ok(CovariateLaw::Normal),
            "lognormal" => Ok(CovariateLaw::LogNormal),
            _ => {
                let nu = lower
                    .strip_prefix('t')
                    .map(|r| r.trim_start_matches(['(', ':']).trim_end_matches(')'))
                    .and_then(|r| r.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown covariate law '{s}'")))?;
                if !(nu >= 1.0 && nu.is_finite()) {
                    return Err(Error::InvalidArgument(format!("t law needs ν ≥ 1, got {nu}")));
                }
                Ok(CovariateLaw::T(nu))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThetaRule {
    /// Every coefficient, intercept included, equal to 0.5.
    Halves,
    /// Every coefficient, intercept included, equal to 1.
    Ones,
    /// Intercept first, then one entry per covariate.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub model: ModelKind,
    pub n: usize,
    /// Number of random covariates; an intercept column is added on top.
    pub covariates: usize,
    pub law: CovariateLaw,
    pub theta: ThetaRule,
}

impl GeneratorSpec {
    pub fn new(model: ModelKind, n: usize, covariates: usize, law: CovariateLaw) -> Self {
        let theta = match model {
            ModelKind::Linear => ThetaRule::Ones,
            ModelKind::Logistic => ThetaRule::Halves,
        };
        Self {
            model,
            n,
            covariates,
            law,
            theta,
        }
    }

    /// Parameter dimension (covariates plus intercept).
    pub fn dim(&self) -> usize {
        self.covariates + 1
    }

    pub fn theta_true(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        match &self.theta {
            ThetaRule::Halves => Ok(vec![0.5; d]),
            ThetaRule::Ones => Ok(vec![1.0; d]),
            ThetaRule::Custom(v) if v.len() == d => Ok(v.clone()),
            ThetaRule::Custom(v) => Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            }),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.covariates == 0 {
            return Err(Error::InvalidArgument("generator needs n ≥ 1 and at least one covariate".into()));
        }
        if let CovariateLaw::T(nu) = self.law {
            if !(nu >= 1.0) {
                return Err(Error::InvalidArgument(format!("t law needs ν ≥ 1, got {nu}")));
            }
        }
        self.theta_true().map(|_| ())
    }
}

/// `Σ` with unit diagonal and 0.5 elsewhere.
pub fn equicorrelated(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 })
}

const COVARIATE_TAG: u64 = 1;
const MIXING_TAG: u64 = 2;
const RESPONSE_TAG: u64 = 3;

/// Draws a dataset with columns `intercept, x1, …, xp` and response `y`.
pub fn generate(spec: &GeneratorSpec, seed: RngSeed) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let p = spec.covariates;
    let d = p + 1;
    let theta = spec.theta_true()?;
    let chol = equicorrelated(p)
        .cholesky()
        .expect("equicorrelated matrix is positive definite")
        .l();

    let mut rng = seed.child(COVARIATE_TAG).rng();
    let z: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();

    let scale: Vec<f64> = match spec.law {
        CovariateLaw::T(nu) => {
            let mut rng = seed.child(MIXING_TAG).rng();
            let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            u.par_iter()
                .map(|&u| {
                    // keep W strictly inside (0, ∞)
                    let u = u.clamp(1e-300, 1.0 - f64::EPSILON);
                    1.0 / (chi.inverse_cdf(u) / nu).sqrt()
                })
                .collect()
        }
        _ => vec![1.0; n],
    };

    let mut x = vec![0.0; n * d];
    x.par_chunks_mut(d).enumerate().for_each(|(i, row)| {
        row[0] = 1.0;
        let zi = &z[i * p..(i + 1) * p];
        for j in 0..p {
            let mut v = 0.0;
            for k in 0..=j {
                v += chol[(j, k)] * zi[k];
            }
            row[j + 1] = match spec.law {
                CovariateLaw::Normal => v,
                CovariateLaw::LogNormal => v.exp(),
                CovariateLaw::T(_) => v * scale[i],
            };
        }
    });

    let mut rng = seed.child(RESPONSE_TAG).rng();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = numeric::dot(&x[i * d..(i + 1) * d], &theta);
            match spec.model {
                ModelKind::Linear => eta + rng.sample::<f64, _>(StandardNormal),
                ModelKind::Logistic => {
                    if rng.gen::<f64>() < sigmoid(eta) {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();

    let mut covariates = vec!["intercept".to_string()];
    covariates.extend((1..=p).map(|j| format!("x{j}")));
    let schema = Schema {
        covariates,
        response: "y".into(),
        trials: None,
    };
    Dataset::new(schema, x, y, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_laws() {
        assert_eq!("normal".parse::<CovariateLaw>().unwrap(), CovariateLaw::Normal);
        assert_eq!("t3".parse::<CovariateLaw>().unwrap(), CovariateLaw::T(3.0));
        assert_eq!("t(2)".parse::<CovariateLaw>().unwrap(), CovariateLaw::T(2.0));
        assert!("t0.5".parse::<CovariateLaw>().is_err());
        assert!("cauchy".parse::<CovariateLaw>().is_err());
        assert_eq!(CovariateLaw::T(5.0).name(), "t5");
    }

    #[test]
    fn lognormal_is_positive() {
        let spec = GeneratorSpec::new(ModelKind::Linear, 500, 3, CovariateLaw::LogNormal);
        let d = generate(&spec, RngSeed::new(3, 0)).unwrap();
        for i in 0..d.len() {
            assert!(d.x_row(i)[1..].iter().all(|v| *v > 0.0));
            assert_eq!(d.x_row(i)[0], 1.0);
        }
    }

    #[test]
    fn deterministic() {
        let spec = GeneratorSpec::new(ModelKind::Logistic, 200, 4, CovariateLaw::T(3.0));
        let a = generate(&spec, RngSeed::new(9, 1)).unwrap();
        let b = generate(&spec, RngSeed::new(9, 1)).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, RngSeed::new(9, 2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn custom_theta_length_checked() {
        let mut spec = GeneratorSpec::new(ModelKind::Linear, 10, 2, CovariateLaw::Normal);
        spec.theta = ThetaRule::Custom(vec![1.0, 2.0]);
        assert!(generate(&spec, RngSeed::new(0, 0)).is_err());
    }
}
