use thiserror::Error;

use crate::mappings::Witness;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible spaces: {left} vs {right}")]
    IncompatibleSpace { left: String, right: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("projection onto an intersection requires Dykstra's algorithm")]
    UseDykstra,

    #[error("point is not in the set (distance {distance:.3e})")]
    NotInSet { distance: f64 },

    #[error("point outside the mapping domain (distance {distance:.3e})")]
    Domain { distance: f64 },

    #[error("invalid mapping: {0}")]
    InvalidMapping(String),

    #[error("invalid semigroup address: {0}")]
    InvalidAddress(String),

    #[error("generators do not commute (violation {:.3e})", .0.violation())]
    NotCommuting(Box<Witness>),

    #[error("orbit diverges (norm {norm:.3e} exceeds {threshold:.3e})")]
    DivergingOrbit { norm: f64, threshold: f64 },

    #[error("invalid averaging scheme: {0}")]
    InvalidScheme(String),

    #[error("point is not attractive (violation {:.3e})", .0.violation())]
    NotAttractive(Box<Witness>),

    #[error("attractive model is empty: {0}")]
    ModelEmpty(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
