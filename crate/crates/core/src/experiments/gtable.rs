//! Number of truncated records `g` in Poisson-optimal OLS plans with
//! leverage-type norms `|ε̂ᵢ| √hᵢ` (up to a common factor), across covariate
//! laws and sampling ratios.

use std::io::Write;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::model::{self, Family};
use crate::numeric;
use crate::optprob::{self, NormVector};
use crate::pipeline;
use crate::sampling::RngSeed;

use super::generate::{self, CovariateLaw, GeneratorSpec, ModelKind};

#[derive(Debug, Clone, PartialEq)]
pub struct GRow {
    pub law: CovariateLaw,
    pub ratio: f64,
    pub g: usize,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GTable {
    pub rows: Vec<GRow>,
}

impl GTable {
    pub fn get(&self, law: CovariateLaw, ratio: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.law == law && r.ratio == ratio).map(|r| r.g)
    }

    /// Header `law,ratio,g`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "law,ratio,g")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.law, r.ratio, r.g)?;
        }
        Ok(())
    }
}

/// Norms `‖L M̈⁻¹ ṁᵢ‖` with `L = (XᵀX)^{1/2}` at the OLS fit `θ̂`.
pub fn leverage_norms(data: &Dataset, theta_hat: &[f64]) -> Result<Vec<f64>> {
    let gram = model::average_hessian(Family::Ols, data, theta_hat)? * -(data.len() as f64);
    let l = numeric::sqrt_psd(&gram);
    model::l_norms(Family::Ols, data, theta_hat, &l)
}

/// One linear dataset per law (all drawn from the same seed), one
/// threshold scan per ratio `s/n`.
pub fn g_table(laws: &[CovariateLaw], ratios: &[f64], n: usize, covariates: usize, seed: u64) -> Result<GTable> {
    let mut rows = Vec::new();
    for &law in laws {
        let spec = GeneratorSpec::new(ModelKind::Linear, n, covariates, law);
        let data = generate::generate(&spec, RngSeed::new(seed, 0))?;
        let fit = pipeline::fit_full(Family::Ols, &data)?;
        let t = NormVector::new(leverage_norms(&data, &fit.theta)?)?;
        for &ratio in ratios {
            let s = ((ratio * n as f64).round() as usize).max(1);
            let th = optprob::poisson_threshold(&t, s)?;
            rows.push(GRow {
                law,
                ratio,
                g: th.g,
                h: th.h,
            });
        }
    }
    Ok(GTable { rows })
}
