//! M-estimation targets `m(Z, θ)` for the supported model families and the
//! per-record quantities the probability engine needs.
//!
//! Every family uses its canonical link, so with linear predictor
//! `η = xᵀθ` the per-record score is `r(η)·x` and the per-record Hessian is
//! `−v(η)·x xᵀ`:
//!
//! | family    | `m(Z, θ)`                         | `r(η)`          | `v(η)`        |
//! |-----------|-----------------------------------|-----------------|---------------|
//! | ols       | `−½ (y − η)²`                     | `y − η`         | `1`           |
//! | logistic  | `y log p + (1 − y) log(1 − p)`    | `y − p`         | `p(1 − p)`    |
//! | binomial  | `y η − k log(1 + e^η)`            | `y − k p`       | `k p(1 − p)`  |
//! | poisson   | `y η − e^η`                       | `y − e^η`       | `e^η`         |
//! | gamma     | `y η + log(−η)`                   | `y + 1/η`       | `1/η²`        |
//!
//! Dropped constants (they do not move the maximiser): binomial drops
//! `log C(k, y)`; poisson drops `−log y!`; gamma is the β-only kernel with
//! the shape fixed, dropping every term free of β. For binomial `y` is the
//! success count, not the ratio.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dataset::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::numeric::{self, SymAccumulator};

/// Clip applied to `p` inside the logistic objective only.
pub const LOGISTIC_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Ols,
    Logistic,
    Poisson,
    Binomial,
    Gamma,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Ols,
        Family::Logistic,
        Family::Poisson,
        Family::Binomial,
        Family::Gamma,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Ols => "ols",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
            Family::Gamma => "gamma",
        }
    }

    /// Logistic and binomial families can suffer from separation.
    pub fn is_binary(&self) -> bool {
        matches!(self, Family::Logistic | Family::Binomial)
    }

    pub fn validate_observation(&self, z: &Observation<'_>) -> std::result::Result<(), String> {
        if z.x.iter().any(|v| !v.is_finite()) {
            return Err("non-finite covariate".into());
        }
        if !z.y.is_finite() {
            return Err("non-finite response".into());
        }
        match self {
            Family::Ols => Ok(()),
            Family::Logistic => {
                if z.y == 0.0 || z.y == 1.0 {
                    Ok(())
                } else {
                    Err(format!("logistic response must be 0 or 1, got {}", z.y))
                }
            }
            Family::Binomial => {
                let k = z.trials.unwrap_or(1.0);
                if !(k >= 1.0 && k.fract() == 0.0) {
                    return Err(format!("trial count must be a positive integer, got {k}"));
                }
                if z.y < 0.0 || z.y > k || z.y.fract() != 0.0 {
                    Err(format!("binomial response must be an integer in [0, {k}], got {}", z.y))
                } else {
                    Ok(())
                }
            }
            Family::Poisson => {
                if z.y >= 0.0 && z.y.fract() == 0.0 {
                    Ok(())
                } else {
                    Err(format!("poisson response must be a nonnegative integer, got {}", z.y))
                }
            }
            Family::Gamma => {
                if z.y > 0.0 {
                    Ok(())
                } else {
                    Err(format!("gamma response must be positive, got {}", z.y))
                }
            }
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        for (row, z) in data.rows().enumerate() {
            self.validate_observation(&z)
                .map_err(|reason| Error::InvalidObservation { row, reason })?;
        }
        Ok(())
    }

    #[inline]
    fn admissible(&self, eta: f64) -> std::result::Result<(), String> {
        if !eta.is_finite() {
            return Err("non-finite linear predictor".into());
        }
        if *self == Family::Gamma && eta >= 0.0 {
            return Err(format!("gamma canonical link needs xᵀθ < 0, got {eta}"));
        }
        Ok(())
    }

    /// Per-record objective as a function of the linear predictor.
    #[inline]
    pub(crate) fn m_eta(&self, y: f64, k: f64, eta: f64) -> f64 {
        match self {
            Family::Ols => -0.5 * (y - eta) * (y - eta),
            Family::Logistic => {
                let p = sigmoid(eta).clamp(LOGISTIC_CLIP, 1.0 - LOGISTIC_CLIP);
                y * p.ln() + (1.0 - y) * (1.0 - p).ln()
            }
            Family::Binomial => y * eta - k * softplus(eta),
            Family::Poisson => y * eta - eta.exp(),
            Family::Gamma => y * eta + (-eta).ln(),
        }
    }

    /// Score coefficient `r(η)` with `ṁ = r(η)·x`.
    #[inline]
    pub(crate) fn r_eta(&self, y: f64, k: f64, eta: f64) -> f64 {
        match self {
            Family::Ols => y - eta,
            Family::Logistic => y - sigmoid(eta),
            Family::Binomial => y - k * sigmoid(eta),
            Family::Poisson => y - eta.exp(),
            Family::Gamma => y + 1.0 / eta,
        }
    }

    /// Curvature `v(η)` with `m̈ = −v(η)·x xᵀ`.
    #[inline]
    pub(crate) fn v_eta(&self, k: f64, eta: f64) -> f64 {
        match self {
            Family::Ols => 1.0,
            Family::Logistic => {
                let p = sigmoid(eta);
                p * (1.0 - p)
            }
            Family::Binomial => {
                let p = sigmoid(eta);
                k * p * (1.0 - p)
            }
            Family::Poisson => eta.exp(),
            Family::Gamma => 1.0 / (eta * eta),
        }
    }

    /// Linear predictor with admissibility check; `row` is used for errors.
    #[inline]
    pub(crate) fn eta_checked(&self, z: &Observation<'_>, theta: &[f64], row: usize) -> Result<f64> {
        if z.x.len() != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: z.x.len(),
                got: theta.len(),
            });
        }
        let eta = numeric::dot(z.x, theta);
        self.admissible(eta)
            .map_err(|reason| Error::Domain { row, reason })?;
        Ok(eta)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ols" | "linear" | "normal" => Ok(Family::Ols),
            "logistic" => Ok(Family::Logistic),
            "poisson" => Ok(Family::Poisson),
            "binomial" => Ok(Family::Binomial),
            "gamma" => Ok(Family::Gamma),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

#[inline]
fn trials(z: &Observation<'_>) -> f64 {
    z.trials.unwrap_or(1.0)
}

/// Per-observation objective `m(Z, θ)`.
pub fn contrib_m(fam: Family, z: &Observation<'_>, theta: &[f64]) -> Result<f64> {
    let eta = fam.eta_checked(z, theta, 0)?;
    Ok(fam.m_eta(z.y, trials(z), eta))
}

/// Analytic gradient `ṁ(Z, θ)`.
pub fn contrib_grad(fam: Family, z: &Observation<'_>, theta: &[f64]) -> Result<Vec<f64>> {
    let eta = fam.eta_checked(z, theta, 0)?;
    let r = fam.r_eta(z.y, trials(z), eta);
    Ok(z.x.iter().map(|xj| r * xj).collect())
}

/// Analytic Hessian `m̈(Z, θ)`; each off-diagonal value is computed once and
/// written to both triangles.
pub fn contrib_hess(fam: Family, z: &Observation<'_>, theta: &[f64]) -> Result<DMatrix<f64>> {
    let eta = fam.eta_checked(z, theta, 0)?;
    let v = fam.v_eta(trials(z), eta);
    let d = z.x.len();
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let vi = -v * z.x[i];
        for j in i..d {
            let e = vi * z.x[j];
            h[(i, j)] = e;
            h[(j, i)] = e;
        }
    }
    Ok(h)
}

/// `‖ṁ(Zᵢ, θ)‖` for row `i`, or `‖A ṁ(Zᵢ, θ)‖` when `a` is given.
pub fn record_norm(fam: Family, data: &Dataset, theta: &[f64], i: usize, a: Option<&DMatrix<f64>>) -> Result<f64> {
    let z = data.row(i);
    let eta = fam.eta_checked(&z, theta, i)?;
    let r = fam.r_eta(z.y, trials(&z), eta).abs();
    Ok(match a {
        None => r * numeric::norm2(z.x),
        Some(a) => r * (a * DVector::from_column_slice(z.x)).norm(),
    })
}

/// `‖ṁ(Zᵢ, θ)‖` for every row, computed as `|r(ηᵢ)|·‖xᵢ‖`.
pub fn grad_norms(fam: Family, data: &Dataset, theta: &[f64]) -> Result<Vec<f64>> {
    check_dim(data, theta)?;
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let z = data.row(i);
            let eta = fam.eta_checked(&z, theta, i)?;
            Ok(fam.r_eta(z.y, trials(&z), eta).abs() * numeric::norm2(z.x))
        })
        .collect()
}

/// Full-data average Hessian `M̈ₙ(θ) = n⁻¹ Σ m̈(Zᵢ, θ)`.
pub fn average_hessian(fam: Family, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(data, theta)?;
    let mut acc = SymAccumulator::new(data.dim());
    for (i, z) in data.rows().enumerate() {
        let eta = fam.eta_checked(&z, theta, i)?;
        acc.add_outer(-fam.v_eta(trials(&z), eta), z.x);
    }
    Ok(acc.to_matrix() / data.len() as f64)
}

/// `‖L M̈ₙ⁻¹ ṁ(Zᵢ, θ)‖` for every row.
pub fn l_norms(fam: Family, data: &Dataset, theta: &[f64], l: &DMatrix<f64>) -> Result<Vec<f64>> {
    let hess = average_hessian(fam, data, theta)?;
    let hinv = numeric::inverse_definite(&hess)?;
    l_norms_with_inverse(fam, data, theta, &(l * hinv))
}

/// Row norms `‖A ṁ(Zᵢ, θ)‖` for a precomputed `A = L M̈⁻¹`.
pub fn l_norms_with_inverse(
    fam: Family,
    data: &Dataset,
    theta: &[f64],
    a: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    check_dim(data, theta)?;
    let d = data.dim();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.ncols(),
        });
    }
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let z = data.row(i);
            let eta = fam.eta_checked(&z, theta, i)?;
            let r = fam.r_eta(z.y, trials(&z), eta);
            let ax = a * DVector::from_column_slice(z.x);
            Ok(r.abs() * ax.norm())
        })
        .collect()
}

/// Logistic Hessian surrogate `−n⁻¹ Σ (yᵢ − p̂ᵢ)² xᵢxᵢᵀ`, free of second
/// derivatives of `p`.
pub fn approx_hessian_logistic(data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(data, theta)?;
    let mut acc = SymAccumulator::new(data.dim());
    for (i, z) in data.rows().enumerate() {
        let eta = Family::Logistic.eta_checked(&z, theta, i)?;
        let r = z.y - sigmoid(eta);
        acc.add_outer(-r * r, z.x);
    }
    Ok(acc.to_matrix() / data.len() as f64)
}

fn check_dim(data: &Dataset, theta: &[f64]) -> Result<()> {
    if data.dim() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}
