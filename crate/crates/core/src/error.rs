use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` must be finite")]
    NonFinite { name: &'static str },

    #[error("parameter `{name}` = {value} is out of domain: expected {expected}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("optimal tilt diverges for x = {x} >= n = {n}")]
    TiltDiverges { x: f64, n: u64 },

    #[error(
        "minimum not bracketed after {expansions} expansions (objective decreasing without bound)"
    )]
    BracketNotClosed { expansions: usize },

    #[error(
        "objective is not unimodal: interior value {interior} exceeds bracket edge value {edge}"
    )]
    NotUnimodal { interior: f64, edge: f64 },

    #[error("parameter `{name}` is required here")]
    MissingParameter { name: &'static str },

    #[error("tilt grid must not be empty")]
    EmptyGrid,

    #[error("supermartingale regime requires 0 < b <= 1, got b = {b}")]
    SupermartingaleRange { b: f64 },

    #[error("event needs truncated variance at level {y} but the path was simulated without it")]
    MissingTruncation { y: f64 },

    #[error("event truncation level {event} does not match path truncation level {path}")]
    TruncationMismatch { event: f64, path: f64 },

    #[error("invalid law: {reason}")]
    InvalidLaw { reason: &'static str },

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },

    #[error("enumeration of {paths} paths exceeds the cap of {cap}")]
    EnumerationTooLarge { paths: u128, cap: u128 },

    #[error("law violates the hypotheses of the bound: {reason}")]
    HypothesisViolated { reason: &'static str },

    #[error(
        "bound {bound} violated: p = {probability} > {bound_value} at x = {x}, v = {v}, n = {n}"
    )]
    BoundViolated {
        bound: &'static str,
        probability: f64,
        bound_value: f64,
        x: f64,
        v: f64,
        n: u64,
    },

    #[error("tightness ratio undefined for zero hits; one-sided statement: p <= {ci_high}")]
    ZeroHits { ci_high: f64 },
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64, Error> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name })
    }
}

pub(crate) fn nonnegative(name: &'static str, value: f64) -> Result<f64, Error> {
    finite(name, value)?;
    if value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::OutOfDomain {
            name,
            value,
            expected: ">= 0",
        })
    }
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64, Error> {
    finite(name, value)?;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::OutOfDomain {
            name,
            value,
            expected: "> 0",
        })
    }
}

pub(crate) fn probability(name: &'static str, value: f64) -> Result<f64, Error> {
    finite(name, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfDomain {
            name,
            value,
            expected: "in [0, 1]",
        })
    }
}
