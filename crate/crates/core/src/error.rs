use alloc::vec::Vec;
use core::fmt;

use crate::agent_response::EquilibriumType;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { name: &'static str, value: f64, reason: &'static str },
    /// A distribution, profile or group could not be built from its parameters.
    InvalidModel { reason: &'static str },
    /// The flip equation has more than one root; roots are feature values.
    FlipAmbiguity { roots: Vec<f64> },
    /// The indifference features satisfy none of the best-response conditions.
    Unclassifiable { opt_in_m: f64, opt_in_i: f64, flip: f64, risk_taker: f64 },
    TypeMismatch { expected: EquilibriumType, found: EquilibriumType },
    /// A post-strategic density has zero mass and was requested anyway.
    Degenerate { reason: &'static str },
    /// Fairness constraint ranges of the two groups do not overlap.
    Infeasible { range_a: (f64, f64), range_b: (f64, f64) },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { name, value, reason } => write!(f, "{name} = {value}: {reason}"),
            Error::InvalidModel { reason } => write!(f, "invalid model: {reason}"),
            Error::FlipAmbiguity { roots } => write!(f, "flip feature is not unique, roots at {roots:?}"),
            Error::Unclassifiable { opt_in_m, opt_in_i, flip, risk_taker } => write!(
                f,
                "no best-response type matches o_M={opt_in_m}, o_I={opt_in_i}, f={flip}, r={risk_taker}"
            ),
            Error::TypeMismatch { expected, found } => {
                write!(f, "partition is of type {found:?}, formula requested for {expected:?}")
            }
            Error::Degenerate { reason } => write!(f, "degenerate statistics: {reason}"),
            Error::Infeasible { range_a, range_b } => write!(
                f,
                "fairness constraint infeasible: group a attains [{}, {}], group b attains [{}, {}]",
                range_a.0, range_a.1, range_b.0, range_b.1
            ),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Error {
    Error::Domain { name, value, reason }
}
