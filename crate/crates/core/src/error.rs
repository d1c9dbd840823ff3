use thiserror::Error;

/// Errors raised by the simulation primitives.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate channel: augmented gain matrix is numerically zero (largest singular value {sigma_max:.3e})")]
    DegenerateChannel { sigma_max: f64 },

    #[error("degenerate pair: both columns are zero")]
    DegeneratePair,

    #[error("point modulus {modulus:.12e} lies outside the annulus [{r_in:.12e}, {r_out:.12e}]")]
    Geometry { modulus: f64, r_in: f64, r_out: f64 },

    #[error("problem size {size} exceeds the limit {limit}")]
    Size { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input_error(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
