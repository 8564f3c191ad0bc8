use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke a documented precondition (lengths, ranges, orders).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("point {point} lies outside the domain {domain}")]
    OutsideDomain { point: String, domain: String },

    #[error("data row {row}: input {point} lies outside the expansion domain {domain}")]
    RowOutsideDomain {
        row: usize,
        point: String,
        domain: String,
    },

    #[error("kernel matrix is not symmetric (max asymmetry {asymmetry:e}, scale {scale:e})")]
    NotSymmetric { asymmetry: f64, scale: f64 },

    /// Eigenvalue `index` (1-based, sorted descending) is negative beyond roundoff.
    #[error("kernel is not positive semi-definite: eigenvalue {index} = {value:e}")]
    NotPsd { index: usize, value: f64 },

    #[error("unsupported Matern smoothness nu = {0} (supported: 0.5, 1.5, 2.5)")]
    UnsupportedSmoothness(f64),

    #[error("adaptive quadrature did not converge within depth {depth} or its panel budget; partial estimate {partial:e}")]
    QuadratureDepth { depth: usize, partial: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("evidence is ill-posed: amplitude {alpha:e} and noise {sigma:e} both vanish")]
    IllPosedEvidence { alpha: f64, sigma: f64 },

    #[error("posterior mass underflow: {0}")]
    Underflow(String),

    #[error("malformed expansion file (line {line}): {message}")]
    Format { line: usize, message: String },
}

impl Error {
    pub(crate) fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }

    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }
}
