//! Newton maximisation of weighted M-estimation objectives `Σᵢ wᵢ m(Zᵢ, θ)`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::Family;
use crate::numeric::{self, CompensatedSum, SymAccumulator};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;
const RIDGE_FACTOR: f64 = 1e-10;
/// Objective values are compared with this relative slack so that steps
/// taken at the rounding floor of the objective are not rejected.
const OBJECTIVE_SLACK: f64 = 1e-12;

/// A weighted objective over a view of a dataset. Indices may repeat.
#[derive(Debug, Clone)]
pub struct WeightedProblem<'a> {
    pub family: Family,
    pub data: &'a Dataset,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl<'a> WeightedProblem<'a> {
    pub fn new(family: Family, data: &'a Dataset, indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("weighted problem needs at least one row".into()));
        }
        if indices.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: weights.len(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for {} rows",
                data.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("weights must be positive and finite, got {w}")));
        }
        Ok(Self {
            family,
            data,
            indices,
            weights,
        })
    }

    /// Every row once with unit weight.
    pub fn full(family: Family, data: &'a Dataset) -> Self {
        Self {
            family,
            data,
            indices: (0..data.len()).collect(),
            weights: vec![1.0; data.len()],
        }
    }

    /// The selected rows with unit weights.
    pub fn unweighted(family: Family, data: &'a Dataset, indices: Vec<usize>) -> Result<Self> {
        let w = vec![1.0; indices.len()];
        Self::new(family, data, indices, w)
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Objective value `Σ wᵢ m(Zᵢ, θ)` with the given weight multiplier.
    fn objective(&self, theta: &[f64], scale: f64) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            let z = self.data.row(i);
            let eta = self.family.eta_checked(&z, theta, i)?;
            acc.add(scale * w * self.family.m_eta(z.y, z.trials.unwrap_or(1.0), eta));
        }
        Ok(acc.value())
    }

    /// Objective, gradient and Hessian with the given weight multiplier.
    fn evaluate(&self, theta: &[f64], scale: f64) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let mut f = CompensatedSum::new();
        let mut g = vec![CompensatedSum::new(); d];
        let mut h = SymAccumulator::new(d);
        for (&i, &w) in self.indices.iter().zip(&self.weights) {
            let z = self.data.row(i);
            let k = z.trials.unwrap_or(1.0);
            let eta = self.family.eta_checked(&z, theta, i)?;
            let sw = scale * w;
            f.add(sw * self.family.m_eta(z.y, k, eta));
            let r = sw * self.family.r_eta(z.y, k, eta);
            for (gj, xj) in g.iter_mut().zip(z.x) {
                gj.add(r * xj);
            }
            h.add_outer(-sw * self.family.v_eta(k, eta), z.x);
        }
        let g = DVector::from_iterator(d, g.iter().map(|c| c.value()));
        Ok((f.value(), g, h.to_matrix()))
    }

    /// Gradient of `Σ wᵢ m(Zᵢ, θ)`.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(theta, 1.0)?.1.iter().cloned().collect())
    }

    /// Hessian of `Σ wᵢ m(Zᵢ, θ)`.
    pub fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(theta, 1.0)?.2)
    }

    pub fn value(&self, theta: &[f64]) -> Result<f64> {
        self.objective(theta, 1.0)
    }

    /// Multiplier that brings the mean weight to one.
    fn weight_scale(&self) -> f64 {
        let total = numeric::compensated_sum(self.weights.iter().cloned());
        self.weights.len() as f64 / total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub theta: Vec<f64>,
    pub iterations: usize,
    /// Gradient norm of the weight-normalised objective (mean weight one)
    /// at `theta`; convergence is judged on this quantity.
    pub grad_norm: f64,
    pub converged: bool,
    /// Hessian of the objective `Σ wᵢ m(Zᵢ, θ)` with the caller's weights.
    pub hessian: DMatrix<f64>,
    /// Multiplier applied to the weights internally.
    pub weight_scale: f64,
    /// Objective value (normalised weights) after each accepted iterate,
    /// starting with the initial point.
    pub trace: Vec<f64>,
}

/// Newton's method with step-halving line search.
///
/// The iteration works on the objective with weights rescaled to mean one,
/// which leaves the maximiser unchanged and makes `tol` independent of the
/// weight scale. Stops once `‖g‖ ≤ tol·(1 + ‖g₀‖)`, or once the Newton
/// step satisfies `‖Δ‖∞ ≤ tol·(1 + ‖θ‖∞)`; the latter catches gradients
/// stuck at the rounding floor of badly scaled designs.
pub fn newton_maximize(
    problem: &WeightedProblem<'_>,
    theta0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be > 0 and max_iter ≥ 1".into()));
    }
    let d = problem.dim();
    if theta0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta0.len(),
        });
    }
    let scale = problem.weight_scale();
    let mut theta = theta0.to_vec();
    let (mut f, mut g, mut h) = problem.evaluate(&theta, scale)?;
    let threshold = tol * (1.0 + g.norm());
    let mut trace = vec![f];
    let mut norms = vec![numeric::norm2(&theta)];
    let mut iterations = 0;
    let mut converged = g.norm() <= threshold;

    while !converged && iterations < max_iter {
        let step = newton_step(&h, &g)?;
        let size = theta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if step.amax() <= tol * (1.0 + size) {
            converged = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            match problem.objective(&cand, scale) {
                Ok(fc) if fc.is_finite() && fc >= f - OBJECTIVE_SLACK * (1.0 + f.abs()) => {
                    accepted = Some(cand);
                    break;
                }
                Ok(_) | Err(Error::Domain { .. }) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(next) = accepted else {
            if problem.objective(&theta, scale).is_err() {
                return Err(Error::Domain {
                    row: 0,
                    reason: "no admissible step after halving".into(),
                });
            }
            break;
        };
        theta = next;
        iterations += 1;
        let eval = problem.evaluate(&theta, scale)?;
        f = eval.0;
        g = eval.1;
        h = eval.2;
        trace.push(f);
        norms.push(numeric::norm2(&theta));
        converged = g.norm() <= threshold;
    }

    // Under separation the gradient decays geometrically while ‖θ‖ grows,
    // so a vanishing gradient alone does not certify a finite maximiser.
    let separation = problem.family.is_binary() && diverging(&norms, theta0);
    if !converged || separation {
        return Err(Error::NonConvergence {
            iterations,
            grad_norm: g.norm(),
            separation,
        });
    }
    Ok(SolveReport {
        theta,
        iterations,
        grad_norm: g.norm(),
        converged,
        hessian: h / scale,
        weight_scale: scale,
        trace,
    })
}

/// Newton direction `−H⁻¹g`, with a single ridge retry when `−H` is not
/// numerically positive definite.
fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    let neg = -h;
    if let Some(ch) = neg.clone().cholesky() {
        return Ok(ch.solve(g));
    }
    let d = h.nrows().max(1) as f64;
    let ridge = RIDGE_FACTOR * neg.trace().abs() / d;
    let mut reg = neg.clone();
    for i in 0..h.nrows() {
        reg[(i, i)] += ridge;
    }
    match reg.cholesky() {
        Some(ch) => Ok(ch.solve(g)),
        None => Err(Error::SingularHessian {
            condition: numeric::condition_estimate(h),
        }),
    }
}

/// Monotone growth of ‖θ‖ over the last ten iterates, well beyond the start.
fn diverging(norms: &[f64], theta0: &[f64]) -> bool {
    const WINDOW: usize = 10;
    if norms.len() <= WINDOW {
        return false;
    }
    let tail = &norms[norms.len() - WINDOW - 1..];
    let start = numeric::norm2(theta0);
    tail.windows(2).all(|w| w[1] > w[0]) && *tail.last().unwrap() > 10.0 * (1.0 + start)
}

/// Solves the weighted normal equations `XᵀWX θ = XᵀWy` (OLS only).
pub fn ols_closed_form(problem: &WeightedProblem<'_>) -> Result<Vec<f64>> {
    if problem.family != Family::Ols {
        return Err(Error::InvalidArgument("closed form is only defined for ols".into()));
    }
    let d = problem.dim();
    let scale = problem.weight_scale();
    let mut gram = SymAccumulator::new(d);
    let mut rhs = vec![CompensatedSum::new(); d];
    for (&i, &w) in problem.indices.iter().zip(&problem.weights) {
        let z = problem.data.row(i);
        let sw = scale * w;
        gram.add_outer(sw, z.x);
        for (r, xj) in rhs.iter_mut().zip(z.x) {
            r.add(sw * z.y * xj);
        }
    }
    let rhs = DVector::from_iterator(d, rhs.iter().map(|c| c.value()));
    let ch = gram.to_matrix().cholesky().ok_or(Error::SingularGram)?;
    Ok(ch.solve(&rhs).iter().cloned().collect())
}

/// Default Newton starting point for a family on the given data.
///
/// Zero for logistic/poisson/binomial; the unweighted closed form for OLS
/// (zero when the dimension exceeds 1000); for gamma the vector with
/// `x̄ᵀθ = −1`, falling back to the intercept-only start `−1/ȳ` when that
/// vector is inadmissible on some row.
pub fn default_start(problem: &WeightedProblem<'_>) -> Vec<f64> {
    let d = problem.dim();
    match problem.family {
        Family::Ols if d <= 1000 => ols_closed_form(problem).unwrap_or_else(|_| vec![0.0; d]),
        Family::Gamma => gamma_start(problem),
        _ => vec![0.0; d],
    }
}

fn gamma_start(problem: &WeightedProblem<'_>) -> Vec<f64> {
    let d = problem.dim();
    let m = problem.indices.len() as f64;
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for &i in &problem.indices {
        for (a, x) in xbar.iter_mut().zip(problem.data.x_row(i)) {
            *a += x / m;
        }
        ybar += problem.data.response()[i] / m;
    }
    let ss: f64 = xbar.iter().map(|v| v * v).sum();
    if ss > 0.0 {
        let cand: Vec<f64> = xbar.iter().map(|v| -v / ss).collect();
        let ok = problem
            .indices
            .iter()
            .all(|&i| numeric::dot(problem.data.x_row(i), &cand) < 0.0);
        if ok {
            return cand;
        }
    }
    let mut theta = vec![0.0; d];
    if let Some(j) = problem.data.intercept_column() {
        theta[j] = -1.0 / ybar.max(f64::MIN_POSITIVE);
    }
    theta
}

/// Newton fit from the default start with default tolerances.
pub fn fit(problem: &WeightedProblem<'_>) -> Result<SolveReport> {
    let start = default_start(problem);
    newton_maximize(problem, &start, DEFAULT_TOL, DEFAULT_MAX_ITER)
}
