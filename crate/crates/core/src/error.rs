use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the formula is defined.
    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The centroid tracker lost the spot.
    #[error(
        "spot lost at frame {frame}: quality {quality:.3} below floor for {run} consecutive frames"
    )]
    SpotLost {
        frame: usize,
        quality: f64,
        run: usize,
    },

    /// Nonlinear least squares did not converge.
    #[error("fit did not converge after {iterations} iterations (residual norm {residual_norm:.3e}, damping {damping:.3e})")]
    FitNotConverged {
        iterations: usize,
        residual_norm: f64,
        damping: f64,
    },

    /// Adaptive quadrature hit its interval cap before reaching tolerance.
    #[error("quadrature did not converge: estimate {estimate:.6e}, error {error:.3e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// The requested calibration band overlaps the mechanical resonance, so
    /// the returned area is biased. The biased estimate is still carried.
    #[error("peak band [{band_lo:.4}, {band_hi:.4}] Hz overlaps the resonance half-width; area {area:.4e} is biased")]
    ResonanceOverlap {
        area: f64,
        band_lo: f64,
        band_hi: f64,
    },

    /// The closed-form pseudo-field is used outside the thick-shell regime.
    #[error("closed form used with lm - l0 = {thickness:.4e} m < 7 lambda = {limit:.4e} m; value {value:.4e} is biased")]
    RegimeViolation {
        value: f64,
        thickness: f64,
        limit: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed {kind} file {path}: {reason}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
