//! Optimal subsampling probabilities.
//!
//! With replacement the trace-optimal distribution is proportional to the
//! per-record norms `tᵢ`. For Poisson sampling every probability is capped
//! at `1/s`, which turns the problem into water filling: the `g` largest
//! norms are clamped at a threshold `H` and the rest stay proportional.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::sampling::Scheme;

/// Nonnegative per-record norms (`‖ṁ(Zᵢ, θ)‖` or an L-weighted variant).
#[derive(Debug, Clone, PartialEq)]
pub struct NormVector(Vec<f64>);

impl NormVector {
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidArgument("norm vector is empty".into()));
        }
        if let Some((i, v)) = t.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("norm {i} is {v}; norms must be finite and ≥ 0")));
        }
        Ok(Self(t))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn positive_total(&self) -> Result<f64> {
        let total = crate::numeric::compensated_sum(self.0.iter().cloned());
        if total > 0.0 {
            Ok(total)
        } else {
            Err(Error::AllZeroNorms)
        }
    }
}

/// Water-filling threshold `H` and the number `g` of clamped records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonThreshold {
    pub h: f64,
    pub g: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HMode {
    /// `H⁰` is an upper sample quantile of the pilot norms.
    Quantile,
    /// `H⁰ = ∞`: no truncation.
    Infinity,
}

impl HMode {
    pub fn name(&self) -> &'static str {
        match self {
            HMode::Quantile => "quantile",
            HMode::Infinity => "infinity",
        }
    }
}

impl fmt::Display for HMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantile" => Ok(HMode::Quantile),
            "infinity" | "inf" => Ok(HMode::Infinity),
            other => Err(Error::InvalidArgument(format!("unknown H mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// Norms evaluated at the full-data estimate.
    Exact,
    /// Norms evaluated at a pilot estimate.
    Pilot { h_mode: Option<HMode>, b: Option<f64> },
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub pi: Vec<f64>,
    pub scheme: Scheme,
    pub alpha: f64,
    pub threshold: Option<PoissonThreshold>,
    pub provenance: Provenance,
}

impl SamplingPlan {
    pub fn uniform(n: usize, scheme: Scheme) -> Self {
        Self {
            pi: vec![1.0 / n as f64; n],
            scheme,
            alpha: 1.0,
            threshold: None,
            provenance: Provenance::Uniform,
        }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Audit sidecar: header `index,pi`, one row per record.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,pi")?;
        for (i, p) in self.pi.iter().enumerate() {
            writeln!(w, "{i},{p}")?;
        }
        Ok(())
    }
}

/// `πᵢ = tᵢ / Σⱼ tⱼ`.
pub fn opt_probs_withreplacement(t: &NormVector) -> Result<SamplingPlan> {
    let total = t.positive_total()?;
    Ok(SamplingPlan {
        pi: t.as_slice().iter().map(|v| v / total).collect(),
        scheme: Scheme::WithReplacement,
        alpha: 0.0,
        threshold: None,
        provenance: Provenance::Exact,
    })
}

/// Ascending stable sort of the norms and compensated prefix sums
/// (`prefix[k]` is the sum of the `k` smallest).
fn sorted_prefix(t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut sorted = t.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut prefix = Vec::with_capacity(sorted.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(0.0);
    for v in &sorted {
        acc.add(*v);
        prefix.push(acc.value());
    }
    (sorted, prefix)
}

fn check_poisson_size(n: usize, s: usize) -> Result<()> {
    if s == 0 || s >= n {
        return Err(Error::InvalidArgument(format!(
            "Poisson threshold needs 1 ≤ s < n (s = {s}, n = {n})"
        )));
    }
    Ok(())
}

/// Smallest `g ∈ [0, s)` with
/// `t₍ₙ₋g₎ / Σ_{i≤n−g} t₍ᵢ₎ < 1/(s−g)` and
/// `t₍ₙ₋g₊₁₎ / Σ_{i≤n−g+1} t₍ᵢ₎ ≥ 1/(s−g+1)` (with `t₍ₙ₊₁₎ = ∞`),
/// and `H = Σ_{i≤n−g} t₍ᵢ₎ / (s−g)`.
pub fn poisson_threshold(t: &NormVector, s: usize) -> Result<PoissonThreshold> {
    let n = t.len();
    check_poisson_size(n, s)?;
    t.positive_total()?;
    let (sorted, prefix) = sorted_prefix(t.as_slice());
    for g in 0..s {
        let kept = n - g;
        let below = sorted[kept - 1] * ((s - g) as f64) < prefix[kept];
        let above = g == 0 || sorted[kept] * (s - g + 1) as f64 >= prefix[kept + 1];
        if below && above {
            return Ok(PoissonThreshold {
                h: prefix[kept] / (s - g) as f64,
                g,
            });
        }
    }
    Err(Error::NoValidG { s })
}

/// `πᵢ = (tᵢ ∧ H) / Σⱼ (tⱼ ∧ H)`.
pub fn opt_probs_poisson(t: &NormVector, s: usize) -> Result<SamplingPlan> {
    let threshold = poisson_threshold(t, s)?;
    let capped: Vec<f64> = t.as_slice().iter().map(|v| v.min(threshold.h)).collect();
    let total = crate::numeric::compensated_sum(capped.iter().cloned());
    Ok(SamplingPlan {
        pi: capped.iter().map(|v| v / total).collect(),
        scheme: Scheme::Poisson,
        alpha: 0.0,
        threshold: Some(threshold),
        provenance: Provenance::Exact,
    })
}

/// Exact optimal plan for either scheme.
pub fn optimal_plan(t: &NormVector, scheme: Scheme, s: usize) -> Result<SamplingPlan> {
    match scheme {
        Scheme::WithReplacement => opt_probs_withreplacement(t),
        Scheme::Poisson => opt_probs_poisson(t, s),
    }
}

/// Brute-force minimiser of `Σ tᵢ²/πᵢ` subject to `Σπᵢ = 1`,
/// `0 ≤ πᵢ ≤ 1/s`.
///
/// Every KKT point clamps some number `g` of the largest norms at `1/s` and
/// keeps the rest proportional to `t`. This tries each `g ∈ [0, s)`, keeps
/// the feasible candidates and returns the one with the smallest objective.
/// Meant for validation on small inputs.
pub fn kkt_oracle(t: &NormVector, s: usize) -> Result<Vec<f64>> {
    let n = t.len();
    if n > 200 {
        return Err(Error::InvalidArgument("kkt_oracle is limited to n ≤ 200".into()));
    }
    check_poisson_size(n, s)?;
    t.positive_total()?;
    let tv = t.as_slice();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| tv[a].total_cmp(&tv[b]));
    let cap = 1.0 / s as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for g in 0..s {
        let kept = n - g;
        let rest: f64 = order[..kept].iter().map(|&i| tv[i]).sum();
        if rest <= 0.0 {
            continue;
        }
        let mass = (s - g) as f64 / s as f64;
        let mut pi = vec![0.0; n];
        let mut feasible = true;
        for (rank, &i) in order.iter().enumerate() {
            pi[i] = if rank < kept { tv[i] * mass / rest } else { cap };
            if pi[i] > cap * (1.0 + 1e-12) {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let objective: f64 = tv
            .iter()
            .zip(&pi)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, p)| t * t / p)
            .sum();
        if best.as_ref().is_none_or(|(b, _)| objective < *b) {
            best = Some((objective, pi));
        }
    }
    best.map(|(_, pi)| pi).ok_or(Error::NoValidG { s })
}

/// `πᵢ ← (1 − α)πᵢ + α/n`.
pub fn defensive_mix(plan: &SamplingPlan, alpha: f64) -> Result<SamplingPlan> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let n = plan.pi.len() as f64;
    let mut out = plan.clone();
    out.pi = plan.pi.iter().map(|p| (1.0 - alpha) * p + alpha / n).collect();
    out.alpha = alpha;
    Ok(out)
}

/// The `k`-th largest value with `k = max(1, ⌈q·m⌉)`, `m = values.len()`.
pub fn upper_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyPilot);
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1), got {q}")));
    }
    let m = values.len();
    let k = ((q * m as f64).ceil() as usize).clamp(1, m);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[k - 1])
}

/// Streaming inclusion rule for the approximate Poisson stage:
/// `π̃ᵢ = (tᵢ ∧ H⁰)/(nΨ⁰)`, mixed as `(1 − α)π̃ᵢ + α/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotPoissonRule {
    pub h0: f64,
    pub psi0: f64,
    pub n: usize,
    pub s: usize,
    pub alpha: f64,
}

impl PilotPoissonRule {
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// Mixed probability for a record with norm `t`.
    #[inline]
    pub fn prob(&self, t: f64) -> f64 {
        let n = self.n as f64;
        let base = t.min(self.h0) / (n * self.psi0);
        (1.0 - self.alpha) * base + self.alpha / n
    }

    /// `(s·π̃) ∧ 1`, the inclusion probability used in estimation weights.
    #[inline]
    pub fn truncated_rate(&self, prob: f64) -> f64 {
        (self.s as f64 * prob).min(1.0)
    }
}

/// Pilot approximations `H⁰` and `Ψ⁰` of the Poisson threshold and the mean
/// truncated norm.
pub fn pilot_poisson_plan(
    pilot_norms: &[f64],
    s: usize,
    n: usize,
    b: f64,
    h_mode: HMode,
) -> Result<PilotPoissonRule> {
    if pilot_norms.is_empty() {
        return Err(Error::EmptyPilot);
    }
    if pilot_norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("pilot norms must be finite and ≥ 0".into()));
    }
    if !(b >= 1.0) {
        return Err(Error::InvalidArgument(format!("b must be ≥ 1, got {b}")));
    }
    let h0 = match h_mode {
        HMode::Infinity => f64::INFINITY,
        HMode::Quantile => upper_quantile(pilot_norms, s as f64 / (b * n as f64))?,
    };
    let psi0 = crate::numeric::compensated_sum(pilot_norms.iter().map(|v| v.min(h0)))
        / pilot_norms.len() as f64;
    if !(psi0 > 0.0) {
        return Err(Error::ZeroPsi);
    }
    Ok(PilotPoissonRule {
        h0,
        psi0,
        n,
        s,
        alpha: 0.0,
    })
}
