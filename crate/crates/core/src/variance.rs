//! Asymptotic variance objects of subsample estimators.
//!
//! For a plan `π` and full-data estimate `θ̂`:
//!
//! * `Λ_R = n⁻² Σ ṁᵢṁᵢᵀ / πᵢ` (with replacement)
//! * `Λ_P = n⁻² Σ (1 − sπᵢ) ṁᵢṁᵢᵀ / πᵢ = Λ_R − (s/n²) Σ ṁᵢṁᵢᵀ` (Poisson)
//! * `V = M̈⁻¹ Λ M̈⁻¹`
//!
//! Rows are accumulated in fixed blocks whose partial sums are reduced in
//! block order, so results do not depend on the thread count.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{self, Family};
use crate::numeric::{self, SymAccumulator};
use crate::optprob::{self, NormVector, Provenance, SamplingPlan};
use crate::sampling::Scheme;

const BLOCK: usize = 2048;

/// Eigenvalue slack used when calling a Λ or V positive semidefinite.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// `Σᵢ cᵢ ṁᵢṁᵢᵀ` where `coef(i)` yields `cᵢ`; rows with `ṁᵢ = 0` are
/// skipped without consulting `coef`.
fn accumulate<F>(fam: Family, data: &Dataset, theta: &[f64], coef: F) -> Result<DMatrix<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let d = data.dim();
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    let n = data.len();
    let blocks: Vec<DMatrix<f64>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = SymAccumulator::new(d);
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let z = data.row(i);
                let eta = fam.eta_checked(&z, theta, i)?;
                let r = fam.r_eta(z.y, z.trials.unwrap_or(1.0), eta);
                if r == 0.0 || z.x.iter().all(|v| *v == 0.0) {
                    continue;
                }
                acc.add_outer(coef(i)? * r * r, z.x);
            }
            Ok(acc.to_matrix())
        })
        .collect::<Result<_>>()?;
    Ok(blocks
        .into_iter()
        .fold(DMatrix::zeros(d, d), |total, m| total + m))
}

fn check_plan(data: &Dataset, pi: &[f64]) -> Result<()> {
    if pi.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: pi.len(),
        });
    }
    Ok(())
}

fn positive_prob(pi: &[f64], i: usize) -> Result<f64> {
    let p = pi[i];
    if p > 0.0 && p.is_finite() {
        Ok(p)
    } else {
        Err(Error::ZeroProbNonzeroGrad { row: i })
    }
}

/// `Σᵢ ṁᵢṁᵢᵀ`.
pub fn gradient_outer_sum(fam: Family, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    accumulate(fam, data, theta, |_| Ok(1.0))
}

/// `Λ_R = n⁻² Σ ṁᵢṁᵢᵀ / πᵢ`.
pub fn lambda_r(fam: Family, data: &Dataset, theta: &[f64], pi: &[f64]) -> Result<DMatrix<f64>> {
    check_plan(data, pi)?;
    let n2 = (data.len() as f64).powi(2);
    accumulate(fam, data, theta, |i| Ok(1.0 / (n2 * positive_prob(pi, i)?)))
}

/// `Λ_P = n⁻² Σ (1 − sπᵢ) ṁᵢṁᵢᵀ / πᵢ`. `s = 0` gives `Λ_R`.
pub fn lambda_p(fam: Family, data: &Dataset, theta: &[f64], pi: &[f64], s: usize) -> Result<DMatrix<f64>> {
    check_plan(data, pi)?;
    let n2 = (data.len() as f64).powi(2);
    let s = s as f64;
    accumulate(fam, data, theta, |i| {
        let p = positive_prob(pi, i)?;
        Ok((1.0 - s * p) / (n2 * p))
    })
}

/// Λ for a plan under its own scheme.
pub fn lambda_for(fam: Family, data: &Dataset, theta: &[f64], plan: &SamplingPlan, s: usize) -> Result<DMatrix<f64>> {
    match plan.scheme {
        Scheme::WithReplacement => lambda_r(fam, data, theta, &plan.pi),
        Scheme::Poisson => lambda_p(fam, data, theta, &plan.pi, s),
    }
}

/// Truncation level behind the Poisson probabilities in [`lambda_alpha`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoMode {
    /// Exact water-filling threshold of the full-data norms.
    Zero,
    /// `H` is the upper `s/(b·n)` sample quantile of the full-data norms.
    Quantile { b: f64 },
}

/// The α-mixed plan built from full-data gradient norms at `θ`.
pub fn alpha_plan(
    fam: Family,
    data: &Dataset,
    theta: &[f64],
    scheme: Scheme,
    alpha: f64,
    s: usize,
    rho: RhoMode,
) -> Result<SamplingPlan> {
    let t = NormVector::new(model::grad_norms(fam, data, theta)?)?;
    let base = match (scheme, rho) {
        (Scheme::WithReplacement, _) => optprob::opt_probs_withreplacement(&t)?,
        (Scheme::Poisson, RhoMode::Zero) => optprob::opt_probs_poisson(&t, s)?,
        (Scheme::Poisson, RhoMode::Quantile { b }) => {
            if !(b >= 1.0) {
                return Err(Error::InvalidArgument(format!("b must be ≥ 1, got {b}")));
            }
            let q = s as f64 / (b * data.len() as f64);
            let h = optprob::upper_quantile(t.as_slice(), q)?;
            let capped: Vec<f64> = t.as_slice().iter().map(|v| v.min(h)).collect();
            let total = numeric::compensated_sum(capped.iter().cloned());
            if !(total > 0.0) {
                return Err(Error::AllZeroNorms);
            }
            SamplingPlan {
                pi: capped.iter().map(|v| v / total).collect(),
                scheme,
                alpha: 0.0,
                threshold: None,
                provenance: Provenance::Exact,
            }
        }
    };
    optprob::defensive_mix(&base, alpha)
}

/// `Λ^α` of the practical estimators: the optimal plan at `θ` mixed with
/// uniform at weight `α`, plugged into `Λ_R` or `Λ_P`.
pub fn lambda_alpha(
    fam: Family,
    data: &Dataset,
    theta: &[f64],
    scheme: Scheme,
    alpha: f64,
    s: usize,
    rho: RhoMode,
) -> Result<DMatrix<f64>> {
    let plan = alpha_plan(fam, data, theta, scheme, alpha, s, rho)?;
    lambda_for(fam, data, theta, &plan, s)
}

/// `V = M̈⁻¹ Λ M̈⁻¹` with `M̈` the full-data average Hessian at `θ`.
pub fn sandwich(fam: Family, data: &Dataset, theta: &[f64], lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let hess = model::average_hessian(fam, data, theta)?;
    sandwich_with_hessian(&hess, lambda)
}

/// `V = H⁻¹ Λ H⁻¹` for a precomputed Hessian.
pub fn sandwich_with_hessian(hess: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if hess.shape() != lambda.shape() {
        return Err(Error::DimensionMismatch {
            expected: hess.nrows(),
            got: lambda.nrows(),
        });
    }
    let inv = numeric::inverse_definite(hess)?;
    Ok(numeric::symmetrize(&(&inv * lambda * &inv)))
}

pub fn is_psd(m: &DMatrix<f64>) -> bool {
    m.nrows() == 0 || numeric::min_eigenvalue(m) >= -PSD_TOLERANCE
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub lambda: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub trace_lambda: f64,
    pub scheme: Scheme,
    pub provenance: Provenance,
}

impl VarianceReport {
    pub fn compute(fam: Family, data: &Dataset, theta: &[f64], plan: &SamplingPlan, s: usize) -> Result<Self> {
        let lambda = lambda_for(fam, data, theta, plan, s)?;
        let v = sandwich(fam, data, theta, &lambda)?;
        Ok(Self {
            trace_lambda: lambda.trace(),
            lambda,
            v,
            scheme: plan.scheme,
            provenance: plan.provenance,
        })
    }

    /// Long format `object,row,col,value`, each matrix in row-major order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "object,row,col,value")?;
        for (name, m) in [("lambda", &self.lambda), ("v", &self.v)] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    writeln!(w, "{name},{i},{j},{}", m[(i, j)])?;
                }
            }
        }
        writeln!(w, "trace_lambda,,,{}", self.trace_lambda)?;
        Ok(())
    }
}
