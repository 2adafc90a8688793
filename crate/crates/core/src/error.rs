use std::fmt;

use thiserror::Error;

use crate::panel::{Estimand, ExposureStatus};

/// Which nuisance model a fitting error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceKind {
    /// Outcome-trend regression fit on control units.
    OutcomeTrend,
    /// Propensity model for membership in the exposed group.
    Propensity,
}

impl fmt::Display for NuisanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NuisanceKind::OutcomeTrend => f.write_str("outcome-trend model"),
            NuisanceKind::Propensity => f.write_str("propensity model"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("incomplete panel for unit `{unit}`: {detail}")]
    IncompletePanel { unit: String, detail: String },

    #[error("inconsistent values for unit `{unit}`: {detail}")]
    Consistency { unit: String, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{estimand} comparison needs at least 2 units with exposure {status}, found {count}")]
    GroupEmpty {
        estimand: Estimand,
        status: ExposureStatus,
        count: usize,
    },

    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),

    #[error("underdetermined fit: {rows} rows for {cols} coefficients")]
    Underdetermined { rows: usize, cols: usize },

    #[error("singular design; offending column(s): {}", columns.join(", "))]
    SingularDesign { columns: Vec<String> },

    #[error("degenerate response: all {n} outcomes belong to one class")]
    DegenerateResponse { n: usize },

    #[error("quasi-separation detected (coefficient norm {norm:.3e}, cap {cap:.3e}); the maximum-likelihood estimate does not exist")]
    Separation { norm: f64, cap: f64 },

    #[error("{kind} at m={m}: {source}")]
    Nuisance {
        kind: NuisanceKind,
        m: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("positivity violation: estimated propensity at or above 1-1e-6 for unit(s) {}", units.join(", "))]
    NonOverlap { units: Vec<String> },

    #[error("observation index m={m} outside 1..={n_m}")]
    Bounds { m: usize, n_m: usize },

    #[error("window preset `{preset}` unavailable: {reason}")]
    Preset { preset: String, reason: String },

    #[error("pre-trend comparison at m={0} is degenerate (needs 2 <= m <= n_m)")]
    DegenerateComparison(usize),

    #[error("unstable ratio: denominator {0:.3e} too close to zero")]
    UnstableRatio(f64),

    #[error("inference unstable: {failed} of {total} replicates failed (cap 10%); first failure: {first}")]
    InferenceUnstable {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("taxed zone `{0}` has no neighbouring zones")]
    DegenerateAdjacency(String),

    #[error("k-means infeasible: k={k} with {n} points")]
    InfeasibleClustering { k: usize, n: usize },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario file error: {0}")]
    ScenarioFormat(String),
}

impl Error {
    /// True for errors caused by malformed input rather than by estimation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Csv(_)
                | Error::Schema(_)
                | Error::IncompletePanel { .. }
                | Error::Consistency { .. }
                | Error::UnknownCovariate(_)
                | Error::UnknownScenario(_)
                | Error::ScenarioFormat(_)
        )
    }

    pub(crate) fn in_nuisance(self, kind: NuisanceKind, m: usize) -> Error {
        Error::Nuisance {
            kind,
            m,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
