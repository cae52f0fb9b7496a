//! Monte Carlo comparison of subsampling methods by empirical MSE
//! `T⁻¹ Σₜ ‖θ̌⁽ᵗ⁾ − θ̂ₙ‖²` against the full-data estimate of one fixed dataset.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{DiscardedCell, Error, Result};
use crate::model::Family;
use crate::optprob::HMode;
use crate::pipeline::{self, PipelineOptions};
use crate::sampling::{RngSeed, Scheme};

use super::config::ExperimentConfig;
use super::data_io::{self, CsvSchema, Strictness};
use super::generate;

/// Largest tolerated fraction of discarded replicates in a cell.
pub const MAX_DISCARD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    OptR,
    UniR,
    OptPInf,
    OptPB,
    UniP,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::OptR, Method::UniR, Method::OptPInf, Method::OptPB, Method::UniP];

    pub fn name(&self) -> &'static str {
        match self {
            Method::OptR => "optR",
            Method::UniR => "uniR",
            Method::OptPInf => "optP_inf",
            Method::OptPB => "optP_b",
            Method::UniP => "uniP",
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Method::OptR | Method::UniR => Scheme::WithReplacement,
            _ => Scheme::Poisson,
        }
    }

    /// Pipeline settings; uniform baselines force `α = 1`.
    pub fn options(&self, s0: usize, s: usize, alpha: f64, b: f64) -> PipelineOptions {
        let base = PipelineOptions::new(s0, s).alpha(alpha).b(b);
        match self {
            Method::OptR => base,
            Method::UniR | Method::UniP => base.alpha(1.0),
            Method::OptPInf => base.h_mode(HMode::Infinity),
            Method::OptPB => base.h_mode(HMode::Quantile),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MseRow {
    pub method: Method,
    pub ratio: f64,
    pub mse: f64,
    pub mse_se: f64,
    pub discarded: usize,
    pub replicates: usize,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MseTable {
    pub rows: Vec<MseRow>,
}

impl MseTable {
    pub fn get(&self, method: Method, ratio: f64) -> Option<&MseRow> {
        self.rows.iter().find(|r| r.method == method && r.ratio == ratio)
    }

    /// Header `method,ratio,mse,mse_se,discarded,seconds`; `seconds` is
    /// empty unless timing was requested.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "method,ratio,mse,mse_se,discarded,seconds")?;
        for r in &self.rows {
            let secs = r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{}", r.method, r.ratio, r.mse, r.mse_se, r.discarded, secs)?;
        }
        Ok(())
    }

    /// Cells whose discarded fraction exceeds [`MAX_DISCARD_FRACTION`].
    pub fn excessive_discards(&self) -> Vec<DiscardedCell> {
        self.rows
            .iter()
            .filter(|r| r.discarded as f64 > MAX_DISCARD_FRACTION * r.replicates as f64)
            .map(|r| DiscardedCell {
                method: r.method.name().into(),
                ratio: r.ratio,
                discarded: r.discarded,
                total: r.replicates,
            })
            .collect()
    }
}

/// Dataset, family and full-data estimate shared by every replicate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Dataset,
    pub family: Family,
    pub theta_hat: Vec<f64>,
}

/// Stream reserved for data generation; replicate `t` uses stream `t`.
pub const DATA_STREAM: u64 = u64::MAX;

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let family = cfg.model.family();
    let data = match &cfg.data {
        Some(path) => {
            let schema = CsvSchema {
                response: cfg.response.clone(),
                covariates: None,
                trials: cfg.trials.clone(),
            };
            data_io::load_csv(path, &schema, Strictness::Strict)?.dataset
        }
        None => generate::generate(&cfg.generator(), RngSeed::new(cfg.seed, DATA_STREAM))?,
    };
    family.validate(&data)?;
    let theta_hat = pipeline::fit_full(family, &data)?.theta;
    Ok(Prepared {
        data,
        family,
        theta_hat,
    })
}

/// `(s₀, s)` for a total ratio `(s₀ + s)/n`.
pub fn stage_sizes(n: usize, s0_fraction: f64, ratio: f64) -> Result<(usize, usize)> {
    let s0 = ((s0_fraction * n as f64).round() as usize).max(1);
    let total = (ratio * n as f64).round() as usize;
    if total <= s0 {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} leaves no room for a second stage after s0 = {s0}"
        )));
    }
    Ok((s0, total - s0))
}

fn is_discardable(e: &Error) -> bool {
    matches!(
        e,
        Error::NonConvergence { .. }
            | Error::SingularHessian { .. }
            | Error::SingularCombination
            | Error::EmptyPilot
            | Error::EmptySecondStage
            | Error::Domain { .. }
            | Error::ZeroPsi
            | Error::AllZeroNorms
    )
}

/// Squared errors of one cell, `None` for discarded replicates, in
/// replicate order.
pub fn cell_errors(
    prep: &Prepared,
    method: Method,
    opts: &PipelineOptions,
    master: u64,
    replicates: usize,
) -> Result<Vec<Option<f64>>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|t| {
            match pipeline::run(prep.family, &prep.data, method.scheme(), opts, RngSeed::new(master, t)) {
                Ok(res) => Ok(res.aggregated.map(|est| {
                    est.iter()
                        .zip(&prep.theta_hat)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                })),
                Err(e) if is_discardable(&e) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect()
}

fn summarize(errors: &[Option<f64>]) -> (f64, f64, usize) {
    let kept: Vec<f64> = errors.iter().flatten().copied().collect();
    let discarded = errors.len() - kept.len();
    if kept.is_empty() {
        return (f64::NAN, f64::NAN, discarded);
    }
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let se = if kept.len() > 1 {
        let var = kept.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    } else {
        f64::NAN
    };
    (mean, se, discarded)
}

/// Every (method, ratio) cell over a prepared dataset, ratios outermost.
pub fn mse_table(prep: &Prepared, cfg: &ExperimentConfig) -> Result<MseTable> {
    let mut rows = Vec::new();
    for &ratio in &cfg.ratios {
        let (s0, s) = stage_sizes(prep.data.len(), cfg.s0_fraction, ratio)?;
        for &method in &cfg.methods {
            let opts = method.options(s0, s, cfg.alpha, cfg.b);
            let start = Instant::now();
            let errors = cell_errors(prep, method, &opts, cfg.seed, cfg.replicates)?;
            let elapsed = start.elapsed().as_secs_f64();
            let (mse, mse_se, discarded) = summarize(&errors);
            rows.push(MseRow {
                method,
                ratio,
                mse,
                mse_se,
                discarded,
                replicates: cfg.replicates,
                seconds: cfg.timing.then_some(elapsed),
            });
        }
    }
    Ok(MseTable { rows })
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(job),
        None => job(),
    }
}

/// Builds the dataset, fits it once and fills the MSE table. Fails with
/// `ExcessiveDiscards` when any cell loses more than 10% of its replicates.
pub fn monte_carlo_mse(cfg: &ExperimentConfig) -> Result<MseTable> {
    cfg.validate()?;
    with_pool(cfg.threads, || {
        let prep = prepare(cfg)?;
        let table = mse_table(&prep, cfg)?;
        let bad = table.excessive_discards();
        if bad.is_empty() {
            Ok(table)
        } else {
            Err(Error::ExcessiveDiscards { cells: bad })
        }
    })
}
