// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operator is not Hermitian (max |H - H†| = {0:.3e})")]
    NotHermitian(f64),

    #[error("steady state is not unique: second-smallest |eigenvalue| = {0:.3e}")]
    DegenerateSteadyState(f64),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error(
        "population inversion at transition ({alpha},{beta}): P_{alpha} = {p_low:.6}, \
         P_{beta} = {p_high:.6}; residual occupancy is undefined in the heating regime"
    )]
    InversionAtTransition {
        alpha: usize,
        beta: usize,
        p_low: f64,
        p_high: f64,
    },

    #[error("mechanics is anti-damped: Γ_opt + γ_m = {0:.6e} ≤ 0")]
    NetInstability(f64),

    #[error("frequency {omega} lies outside the spectrum grid [{min}, {max}]")]
    OutsideGrid { omega: f64, min: f64, max: f64 },

    #[error("oracle decay fit rejected: {0}")]
    FitQuality(String),

    #[error("unsupported query: {0}")]
    Unsupported(String),

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
