use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LppError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LppError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {name} = {value} outside supported domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("memory budget exceeded: {what} needs {required} bytes, budget is {budget} bytes")]
    MemoryBudget {
        what: String,
        required: u64,
        budget: u64,
    },

    #[error("enumeration guard exceeded: {paths} paths > limit {limit}")]
    EnumerationGuard { paths: u128, limit: u128 },

    #[error("{method} did not converge after {iterations} iterations")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
    },

    #[error("quadrature not converged at s = {s}: order {order} gives {coarse:e}, order {fine_order} gives {fine:e}")]
    Quadrature {
        s: f64,
        order: usize,
        fine_order: usize,
        coarse: f64,
        fine: f64,
    },

    #[error("passage result has no row profile")]
    MissingProfile,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema mismatch in {file}: column `{column}`: {detail}")]
    Schema {
        file: PathBuf,
        column: String,
        detail: String,
    },

    #[error("budget refused: {0}")]
    BudgetRefused(String),

    #[error("run incomplete: {completed} of {total} replicas finished")]
    Incomplete { completed: usize, total: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LppError {
    /// Stable machine-readable tag, used by the CLI error line and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            LppError::InvalidParameter(_) => "invalid_parameter",
            LppError::OutOfDomain { .. } => "out_of_domain",
            LppError::Degenerate(_) => "degenerate",
            LppError::MemoryBudget { .. } => "memory_budget",
            LppError::EnumerationGuard { .. } => "enumeration_guard",
            LppError::NoConvergence { .. } => "no_convergence",
            LppError::Quadrature { .. } => "quadrature",
            LppError::MissingProfile => "missing_profile",
            LppError::Parse(_) => "parse",
            LppError::Schema { .. } => "schema",
            LppError::BudgetRefused(_) => "budget_refused",
            LppError::Incomplete { .. } => "incomplete",
            LppError::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LppError::Io {
            path: path.into(),
            source,
        }
    }
}
