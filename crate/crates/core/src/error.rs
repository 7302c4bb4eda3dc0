use thiserror::Error;

/// Errors raised across the analysis chain.
///
/// The variants mirror the failure classes the command line maps onto exit
/// codes, so callers can tell a bad argument from a bad fit.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or model parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// A simulation or run configuration violates one of its guards.
    #[error("invalid configuration: {0}")]
    Configuration(String),

    /// Inputs are inconsistent with the requested operation.
    #[error("usage error: {0}")]
    Usage(String),

    /// Calibration could not be carried out (e.g. zero reference level).
    #[error("calibration error: {0}")]
    Calibration(String),

    /// The nonlinear fit did not converge.
    #[error("fit failed after {iterations} iterations (cost {cost:.6e}): {reason}")]
    Fit {
        iterations: usize,
        cost: f64,
        reason: String,
    },

    /// Tomographic reconstruction diverged or was ill-posed.
    #[error("reconstruction error: {0}")]
    Reconstruction(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_domain(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::ParameterDomain(msg()))
    }
}
