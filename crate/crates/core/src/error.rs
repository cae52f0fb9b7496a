use thiserror::Error;

/// Errors raised across the library. The variant name is what the CLI
/// prints as the error kind.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row}: {reason}")]
    InvalidObservation { row: usize, reason: String },

    #[error("row {row}: parameter outside the admissible region ({reason})")]
    Domain { row: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular Hessian (condition estimate {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("singular weighted Gram matrix")]
    SingularGram,

    #[error("Newton iteration did not converge after {iterations} iterations (gradient norm {grad_norm:e}{})",
        if *.separation { ", separation suspected" } else { "" })]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        separation: bool,
    },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("all norms are zero")]
    AllZeroNorms,

    #[error("no g in [0, {s}) satisfies the threshold conditions")]
    NoValidG { s: usize },

    #[error("pilot subsample is empty")]
    EmptyPilot,

    #[error("second-stage subsample is empty")]
    EmptySecondStage,

    #[error("all pilot norms are zero")]
    ZeroPsi,

    #[error("row {row} has a nonzero gradient but zero sampling probability")]
    ZeroProbNonzeroGrad { row: usize },

    #[error("singular combination matrix in aggregation")]
    SingularCombination,

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}", excessive_discards_message(.cells))]
    ExcessiveDiscards { cells: Vec<DiscardedCell> },

    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscardedCell {
    pub method: String,
    pub ratio: f64,
    pub discarded: usize,
    pub total: usize,
}

fn excessive_discards_message(cells: &[DiscardedCell]) -> String {
    let mut msg = String::from("more than 10% of replicates discarded in:");
    for c in cells {
        msg.push_str(&format!(
            " [{} ratio={} {}/{}]",
            c.method, c.ratio, c.discarded, c.total
        ));
    }
    msg
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and FFI error codes.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidObservation { .. } => "InvalidObservation",
            Error::Domain { .. } => "Domain",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularHessian { .. } => "SingularHessian",
            Error::SingularGram => "SingularGram",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::AllZeroNorms => "AllZeroNorms",
            Error::NoValidG { .. } => "NoValidG",
            Error::EmptyPilot => "EmptyPilot",
            Error::EmptySecondStage => "EmptySecondStage",
            Error::ZeroPsi => "ZeroPsi",
            Error::ZeroProbNonzeroGrad { .. } => "ZeroProbNonzeroGrad",
            Error::SingularCombination => "SingularCombination",
            Error::Parse { .. } => "Parse",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::ExcessiveDiscards { .. } => "ExcessiveDiscards",
            Error::Io(_) => "Io",
        }
    }

    /// True for failures caused by the input data rather than the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidObservation { .. }
                | Error::DimensionMismatch { .. }
                | Error::Parse { .. }
                | Error::SchemaMismatch(_)
                | Error::Io(_)
                | Error::InvalidDistribution(_)
                | Error::InvalidArgument(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
