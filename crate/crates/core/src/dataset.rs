use crate::error::{Error, Result};

/// Column roles of a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub covariates: Vec<String>,
    pub response: String,
    pub trials: Option<String>,
}

impl Schema {
    /// Covariates named `x0, x1, …`, response `y`, no trial column.
    pub fn anonymous(p: usize) -> Self {
        Self {
            covariates: (0..p).map(|j| format!("x{j}")).collect(),
            response: "y".into(),
            trials: None,
        }
    }
}

/// One record `Z = (x, y)` with an optional binomial trial count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation<'a> {
    pub x: &'a [f64],
    pub y: f64,
    pub trials: Option<f64>,
}

impl<'a> Observation<'a> {
    pub fn new(x: &'a [f64], y: f64) -> Self {
        Self { x, y, trials: None }
    }

    pub fn with_trials(x: &'a [f64], y: f64, trials: f64) -> Self {
        Self {
            x,
            y,
            trials: Some(trials),
        }
    }
}

/// Immutable full data set, covariates stored row-major.
///
/// No intercept column is ever added implicitly: if the model needs one the
/// design must already contain a constant column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    trials: Option<Vec<f64>>,
    schema: Schema,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        x: Vec<f64>,
        y: Vec<f64>,
        trials: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = y.len();
        let p = schema.covariates.len();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset must have at least one row".into()));
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: x.len(),
            });
        }
        if let Some(k) = &trials {
            if k.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: k.len(),
                });
            }
        }
        if trials.is_some() != schema.trials.is_some() {
            return Err(Error::SchemaMismatch(
                "trial column presence differs between schema and data".into(),
            ));
        }
        for i in 0..n {
            if x[i * p..(i + 1) * p].iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidObservation {
                    row: i,
                    reason: "non-finite covariate".into(),
                });
            }
            if !y[i].is_finite() {
                return Err(Error::InvalidObservation {
                    row: i,
                    reason: "non-finite response".into(),
                });
            }
            if let Some(k) = &trials {
                if !(k[i].is_finite() && k[i] >= 1.0 && k[i].fract() == 0.0) {
                    return Err(Error::InvalidObservation {
                        row: i,
                        reason: "trial count must be a positive integer".into(),
                    });
                }
            }
        }
        Ok(Self {
            n,
            p,
            x,
            y,
            trials,
            schema,
        })
    }

    /// Builds a dataset from covariate rows with anonymous column names.
    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.len());
        let mut x = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            x.extend_from_slice(r);
        }
        Self::new(Schema::anonymous(p), x, y, None)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of covariate columns (the parameter dimension for every
    /// supported family).
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn trials(&self) -> Option<&[f64]> {
        self.trials.as_deref()
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn row(&self, i: usize) -> Observation<'_> {
        Observation {
            x: self.x_row(i),
            y: self.y[i],
            trials: self.trials.as_ref().map(|k| k[i]),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Observation<'_>> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    /// Index of a column whose entries are all exactly one, if any.
    pub fn intercept_column(&self) -> Option<usize> {
        (0..self.p).find(|&j| (0..self.n).all(|i| self.x[i * self.p + j] == 1.0))
    }
}
