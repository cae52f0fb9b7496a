//! Two-stage subsample estimators.
//!
//! Both pipelines draw a uniform pilot, estimate gradient norms at the pilot
//! fit, draw a second subsample with approximately optimal probabilities and
//! fit the inverse-probability weighted objective. The with-replacement path
//! materialises the full probability vector; the Poisson path decides every
//! record in a single streaming pass and never stores it.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, Family};
use crate::numeric;
use crate::optprob::{self, HMode, NormVector, PilotPoissonRule};
use crate::sampling::{self, RngSeed, Scheme, Subsample};
use crate::solver::{self, SolveReport, WeightedProblem};

const PILOT_TAG: u64 = 1;
const SECOND_TAG: u64 = 2;
const MAX_EMPTY_PILOT_RETRIES: u64 = 3;

/// How per-record norms are formed from the gradient.
#[derive(Debug, Clone, PartialEq)]
pub enum LMode {
    /// `‖ṁ‖`, the `L = M̈` criterion.
    GradNorm,
    /// `‖L M̈⁻¹ ṁ‖` for a user matrix `L`.
    Explicit(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub s0: usize,
    pub s: usize,
    pub alpha: f64,
    /// Quantile tuning constant for the Poisson threshold; ignored with
    /// replacement.
    pub b: f64,
    pub h_mode: HMode,
    pub l_mode: LMode,
}

impl PipelineOptions {
    pub fn new(s0: usize, s: usize) -> Self {
        Self {
            s0,
            s,
            alpha: 0.1,
            b: 1.0,
            h_mode: HMode::Quantile,
            l_mode: LMode::GradNorm,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn h_mode(mut self, h_mode: HMode) -> Self {
        self.h_mode = h_mode;
        self
    }

    pub fn l_mode(mut self, l_mode: LMode) -> Self {
        self.l_mode = l_mode;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.s0 == 0 || self.s == 0 {
            return Err(Error::InvalidArgument("s0 and s must be ≥ 1".into()));
        }
        if self.s0 > n {
            return Err(Error::InvalidArgument(format!("pilot size {} exceeds n = {n}", self.s0)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.b >= 1.0) {
            return Err(Error::InvalidArgument(format!("b must be ≥ 1, got {}", self.b)));
        }
        Ok(())
    }
}

/// One stage's solution and the Hessian of that stage's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFit {
    pub theta: Vec<f64>,
    pub hessian: DMatrix<f64>,
    /// Drawn rows, with multiplicity for sampling with replacement.
    pub indices: Vec<usize>,
    /// Realised number of drawn rows.
    pub size: usize,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub scheme: Scheme,
    pub alpha: f64,
    pub h_mode: Option<HMode>,
    pub b: Option<f64>,
    pub h0: Option<f64>,
    pub psi0: Option<f64>,
    pub pilot: StageFit,
    pub second: StageFit,
    pub aggregated: Option<Vec<f64>>,
    /// Pilot draws used, including retries.
    pub pilot_attempts: u64,
}

impl PipelineResult {
    pub fn dim(&self) -> usize {
        self.pilot.theta.len()
    }

    pub fn csv_header(d: usize) -> String {
        let mut cols: Vec<String> = [
            "scheme",
            "alpha",
            "h_mode",
            "b",
            "pilot_size",
            "second_size",
            "pilot_iters",
            "second_iters",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["theta_pilot", "theta_second", "theta_agg"] {
            cols.extend((0..d).map(|j| format!("{prefix}_{j}")));
        }
        cols.join(",")
    }

    /// One row matching [`PipelineResult::csv_header`]; absent values are
    /// empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut cols = vec![
            self.scheme.name().to_string(),
            self.alpha.to_string(),
            opt(self.h_mode.map(|h| h.name().to_string())),
            opt(self.b.map(|b| b.to_string())),
            self.pilot.size.to_string(),
            self.second.size.to_string(),
            self.pilot.report.iterations.to_string(),
            self.second.report.iterations.to_string(),
        ];
        cols.extend(self.pilot.theta.iter().map(|v| v.to_string()));
        cols.extend(self.second.theta.iter().map(|v| v.to_string()));
        match &self.aggregated {
            Some(a) => cols.extend(a.iter().map(|v| v.to_string())),
            None => cols.extend((0..self.dim()).map(|_| String::new())),
        }
        cols.join(",")
    }

    /// The aggregated estimate when available, else the second-stage one.
    pub fn estimate(&self) -> &[f64] {
        self.aggregated.as_deref().unwrap_or(&self.second.theta)
    }
}

/// Unweighted maximiser over all rows.
pub fn fit_full(fam: Family, data: &Dataset) -> Result<SolveReport> {
    solver::fit(&WeightedProblem::full(fam, data))
}

/// `(s₀H₀ + s₁H₁)⁻¹ (s₀H₀θ₀ + s₁H₁θ₁)`.
pub fn aggregate(
    theta0: &[f64],
    h0: &DMatrix<f64>,
    size0: f64,
    theta1: &[f64],
    h1: &DMatrix<f64>,
    size1: f64,
) -> Result<Vec<f64>> {
    let d = theta0.len();
    if theta1.len() != d || h0.shape() != (d, d) || h1.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta1.len(),
        });
    }
    let a0 = h0 * size0;
    let a1 = h1 * size1;
    let rhs = &a0 * DVector::from_column_slice(theta0) + &a1 * DVector::from_column_slice(theta1);
    let total = numeric::symmetrize(&(a0 + a1));
    numeric::solve_definite(&total, &rhs)
        .map(|v| v.iter().cloned().collect())
        .map_err(|_| Error::SingularCombination)
}

fn fit_stage(fam: Family, data: &Dataset, sub: &Subsample, weights: Vec<f64>, start: Option<&[f64]>) -> Result<StageFit> {
    let problem = WeightedProblem::new(fam, data, sub.indices.clone(), weights)?;
    let theta0 = match start {
        Some(t) if fam != Family::Ols && problem.value(t).is_ok() => t.to_vec(),
        _ => solver::default_start(&problem),
    };
    let report = solver::newton_maximize(&problem, &theta0, solver::DEFAULT_TOL, solver::DEFAULT_MAX_ITER)?;
    Ok(StageFit {
        theta: report.theta.clone(),
        hessian: report.hessian.clone(),
        indices: sub.indices.clone(),
        size: sub.realized_size(),
        report,
    })
}

/// Uniform pilot and its fit of `(1/s₀) Σ m(Z⁰ᵢ, θ)`. Empty Poisson pilots
/// are redrawn up to three times; a non-converged fit is retried once.
fn pilot_stage(fam: Family, data: &Dataset, s0: usize, scheme: Scheme, seed: RngSeed) -> Result<(StageFit, u64)> {
    let base = seed.child(PILOT_TAG);
    let mut attempt = 0u64;
    let mut fit_retried = false;
    loop {
        let sub = match sampling::pilot_uniform(data.len(), s0, scheme, base.child(attempt)) {
            Ok(sub) => sub,
            Err(Error::EmptyPilot) if attempt < MAX_EMPTY_PILOT_RETRIES => {
                attempt += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let w = vec![1.0 / sub.realized_size() as f64; sub.realized_size()];
        match fit_stage(fam, data, &sub, w, None) {
            Ok(fit) => return Ok((fit, attempt + 1)),
            Err(Error::NonConvergence { .. }) if !fit_retried => {
                fit_retried = true;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Subsampling with replacement: pilot of size `s₀`, mixed plan
/// `(1 − α)π̃ + α/n` over all rows, second subsample of size `s`, weights
/// `1/(n s π̃ᵢ)`.
pub fn run_withreplacement(fam: Family, data: &Dataset, opts: &PipelineOptions, seed: RngSeed) -> Result<PipelineResult> {
    opts.validate(data.len())?;
    let n = data.len();
    let (pilot, attempts) = pilot_stage(fam, data, opts.s0, Scheme::WithReplacement, seed)?;

    let plan = if opts.alpha >= 1.0 {
        optprob::SamplingPlan::uniform(n, Scheme::WithReplacement)
    } else {
        let t = match &opts.l_mode {
            LMode::GradNorm => model::grad_norms(fam, data, &pilot.theta)?,
            LMode::Explicit(l) => model::l_norms(fam, data, &pilot.theta, l)?,
        };
        let base = optprob::opt_probs_withreplacement(&NormVector::new(t)?)?;
        optprob::defensive_mix(&base, opts.alpha)?
    };
    let sub = sampling::sample_with_replacement(&plan.pi, opts.s, seed.child(SECOND_TAG))?;
    let scale = n as f64 * opts.s as f64;
    let weights = sub.probs.iter().map(|p| 1.0 / (scale * p)).collect();
    let second = fit_stage(fam, data, &sub, weights, Some(&pilot.theta))?;

    let aggregated = aggregate(
        &pilot.theta,
        &pilot.hessian,
        opts.s0 as f64,
        &second.theta,
        &second.hessian,
        opts.s as f64,
    )
    .ok();
    Ok(PipelineResult {
        scheme: Scheme::WithReplacement,
        alpha: opts.alpha,
        h_mode: None,
        b: None,
        h0: None,
        psi0: None,
        pilot,
        second,
        aggregated,
        pilot_attempts: attempts,
    })
}

/// Poisson subsampling: Poisson pilot at rate `s₀/n`, threshold `H⁰` and
/// mean truncated norm `Ψ⁰` from the pilot, one streaming pass that keeps
/// row `i` iff `uᵢ ≤ s π̃ᵢ`, weights `1/(n·((s π̃ᵢ) ∧ 1))`.
pub fn run_poisson(fam: Family, data: &Dataset, opts: &PipelineOptions, seed: RngSeed) -> Result<PipelineResult> {
    opts.validate(data.len())?;
    let n = data.len();
    let (pilot, attempts) = pilot_stage(fam, data, opts.s0, Scheme::Poisson, seed)?;

    let a = match &opts.l_mode {
        LMode::GradNorm => None,
        LMode::Explicit(l) => Some(l * numeric::inverse_definite(&pilot.hessian)?),
    };
    let rule = if opts.alpha >= 1.0 {
        PilotPoissonRule {
            h0: f64::INFINITY,
            psi0: 1.0,
            n,
            s: opts.s,
            alpha: 1.0,
        }
    } else {
        let pilot_norms = pilot
            .indices
            .iter()
            .map(|&i| model::record_norm(fam, data, &pilot.theta, i, a.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        optprob::pilot_poisson_plan(&pilot_norms, opts.s, n, opts.b, opts.h_mode)?.with_alpha(opts.alpha)?
    };

    let uniform = opts.alpha >= 1.0;
    let sub = sampling::sample_poisson_with(n, opts.s, seed.child(SECOND_TAG), |i| {
        if uniform {
            return Ok(Some(1.0 / n as f64));
        }
        let t = model::record_norm(fam, data, &pilot.theta, i, a.as_ref())?;
        Ok(Some(rule.prob(t)))
    })?;
    if sub.is_empty() {
        return Err(Error::EmptySecondStage);
    }
    let weights = sub
        .probs
        .iter()
        .map(|p| 1.0 / (n as f64 * rule.truncated_rate(*p)))
        .collect();
    let second = fit_stage(fam, data, &sub, weights, Some(&pilot.theta))?;

    let aggregated = aggregate(
        &pilot.theta,
        &pilot.hessian,
        pilot.size as f64,
        &second.theta,
        &second.hessian,
        opts.s as f64,
    )
    .ok();
    Ok(PipelineResult {
        scheme: Scheme::Poisson,
        alpha: opts.alpha,
        h_mode: (!uniform).then_some(opts.h_mode),
        b: (!uniform && opts.h_mode == HMode::Quantile).then_some(opts.b),
        h0: (!uniform).then_some(rule.h0),
        psi0: (!uniform).then_some(rule.psi0),
        pilot,
        second,
        aggregated,
        pilot_attempts: attempts,
    })
}

/// Dispatch on the scheme.
pub fn run(fam: Family, data: &Dataset, scheme: Scheme, opts: &PipelineOptions, seed: RngSeed) -> Result<PipelineResult> {
    match scheme {
        Scheme::WithReplacement => run_withreplacement(fam, data, opts, seed),
        Scheme::Poisson => run_poisson(fam, data, opts, seed),
    }
}
