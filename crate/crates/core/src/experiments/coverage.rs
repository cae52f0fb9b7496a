//! Gaussian-limit diagnostics for subsample estimators drawn with the exact
//! optimal plan at the full-data estimate.
//!
//! Each replicate yields `θ̃`, standardised as `√s · V^{-1/2}(θ̃ − θ̂ₙ)`
//! with `V` the sandwich variance of the chosen scheme. The report gives the
//! per-coordinate coverage of nominal 95% intervals `θ̃ⱼ ± 1.96 √(Vⱼⱼ/s)`,
//! the mean squared Mahalanobis length of the standardised errors (close to
//! `d` under the limit) and a Kolmogorov–Smirnov distance of those lengths
//! to `χ²_d`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{self, Family};
use crate::numeric;
use crate::optprob::{self, NormVector, SamplingPlan};
use crate::pipeline;
use crate::sampling::{self, RngSeed, Scheme};
use crate::solver::{self, WeightedProblem};
use crate::variance;

use super::generate::{self, GeneratorSpec};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageConfig {
    pub generator: GeneratorSpec,
    pub scheme: Scheme,
    /// Scheme whose variance standardises the errors; defaults to `scheme`.
    pub variance_scheme: Option<Scheme>,
    pub s: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub coverage: Vec<f64>,
    pub mean_mahalanobis: f64,
    pub ks_statistic: f64,
    pub replicates: usize,
    pub discarded: usize,
}

impl CoverageReport {
    /// Header `coordinate,coverage` then summary rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "coordinate,coverage")?;
        for (j, c) in self.coverage.iter().enumerate() {
            writeln!(w, "{j},{c}")?;
        }
        writeln!(w, "mean_mahalanobis,{}", self.mean_mahalanobis)?;
        writeln!(w, "ks_statistic,{}", self.ks_statistic)?;
        writeln!(w, "discarded,{}", self.discarded)?;
        Ok(())
    }
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

fn exact_plan(fam: Family, data: &crate::dataset::Dataset, theta: &[f64], scheme: Scheme, s: usize) -> Result<SamplingPlan> {
    let t = NormVector::new(model::grad_norms(fam, data, theta)?)?;
    optprob::optimal_plan(&t, scheme, s)
}

pub fn coverage_check(cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.replicates == 0 || cfg.s == 0 {
        return Err(Error::InvalidArgument("coverage needs s ≥ 1 and at least one replicate".into()));
    }
    let fam = cfg.generator.model.family();
    let data = generate::generate(&cfg.generator, RngSeed::new(cfg.seed, super::mse::DATA_STREAM))?;
    let n = data.len();
    let theta_hat = pipeline::fit_full(fam, &data)?.theta;
    let d = theta_hat.len();

    let plan = exact_plan(fam, &data, &theta_hat, cfg.scheme, cfg.s)?;
    let var_scheme = cfg.variance_scheme.unwrap_or(cfg.scheme);
    let var_plan = if var_scheme == cfg.scheme {
        plan.clone()
    } else {
        exact_plan(fam, &data, &theta_hat, var_scheme, cfg.s)?
    };
    let lambda = variance::lambda_for(fam, &data, &theta_hat, &var_plan, cfg.s)?;
    let v = variance::sandwich(fam, &data, &theta_hat, &lambda)?;
    let v_inv_root = numeric::sqrt_psd(&numeric::inverse_definite(&v)?);
    let sd: Vec<f64> = (0..d).map(|j| (v[(j, j)] / cfg.s as f64).sqrt()).collect();
    let root_s = (cfg.s as f64).sqrt();

    let table = match cfg.scheme {
        Scheme::WithReplacement => Some(sampling::AliasTable::new(&plan.pi)?),
        Scheme::Poisson => None,
    };
    let draws: Vec<Option<(Vec<bool>, f64)>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let seed = RngSeed::new(cfg.seed, t);
            let (indices, weights): (Vec<usize>, Vec<f64>) = match &table {
                Some(table) => {
                    let mut rng = seed.rng();
                    (0..cfg.s)
                        .map(|_| {
                            let i = table.sample(&mut rng);
                            (i, 1.0 / (n as f64 * cfg.s as f64 * plan.pi[i]))
                        })
                        .unzip()
                }
                None => {
                    let sub = sampling::sample_poisson(plan.pi.iter().copied(), cfg.s, seed);
                    let w = sub
                        .probs
                        .iter()
                        .map(|p| 1.0 / (n as f64 * (cfg.s as f64 * p).min(1.0)))
                        .collect();
                    (sub.indices, w)
                }
            };
            if indices.is_empty() {
                return Ok(None);
            }
            let problem = WeightedProblem::new(fam, &data, indices, weights)?;
            let fit = match solver::newton_maximize(&problem, &theta_hat, solver::DEFAULT_TOL, solver::DEFAULT_MAX_ITER) {
                Ok(f) => f,
                Err(Error::NonConvergence { .. } | Error::SingularHessian { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let err: Vec<f64> = fit.theta.iter().zip(&theta_hat).map(|(a, b)| a - b).collect();
            let covered = err.iter().zip(&sd).map(|(e, s)| e.abs() <= Z95 * s).collect();
            let z = &v_inv_root * DVector::from_column_slice(&err) * root_s;
            Ok(Some((covered, z.norm_squared())))
        })
        .collect::<Result<_>>()?;

    let kept: Vec<&(Vec<bool>, f64)> = draws.iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::EmptySecondStage);
    }
    let m = kept.len() as f64;
    let coverage = (0..d)
        .map(|j| kept.iter().filter(|(c, _)| c[j]).count() as f64 / m)
        .collect();
    let lengths: Vec<f64> = kept.iter().map(|(_, q)| *q).collect();
    let chi = ChiSquared::new(d as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(CoverageReport {
        coverage,
        mean_mahalanobis: lengths.iter().sum::<f64>() / m,
        ks_statistic: ks_statistic(&lengths, |x| chi.cdf(x)),
        replicates: cfg.replicates,
        discarded: cfg.replicates - kept.len(),
    })
}

/// `V^{-1/2}` for a symmetric positive definite `V`.
pub fn inverse_root(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(numeric::sqrt_psd(&numeric::inverse_definite(v)?))
}
