use core::fmt;

use crate::optimize::{Axis, Constraint};

/// Errors produced by the analysis, simulation and design routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated its documented domain.
    InvalidArgument(&'static str),
    /// The encrypted bit probabilities do not satisfy `p̃ > 1/2 > q̃`.
    Inadmissible { p_tilde: f64, q_tilde: f64 },
    /// No tolerance constraint binds on the admissible part of an axis.
    NoRoot {
        axis: Axis,
        constraint: Constraint,
        kappa: f64,
        supremum: f64,
    },
    /// The integer threshold search did not reach a fixed point.
    SearchFailure { steps: u64 },
    /// Every Monte Carlo replication hit the step guard.
    EstimationFailure { truncated: u64 },
    /// The design grid contains no feasible point.
    NoFeasiblePoint,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::Inadmissible { p_tilde, q_tilde } => write!(
                f,
                "inadmissible encryption: p_tilde = {p_tilde} and q_tilde = {q_tilde} must satisfy p_tilde > 1/2 > q_tilde"
            ),
            Error::NoRoot {
                axis,
                constraint,
                kappa,
                supremum,
            } => write!(
                f,
                "no root on the {axis} axis: {constraint} tolerance {kappa} exceeds the attainable supremum {supremum}"
            ),
            Error::SearchFailure { steps } => {
                write!(f, "threshold search did not converge after {steps} steps")
            }
            Error::EstimationFailure { truncated } => {
                write!(f, "all {truncated} replications were truncated")
            }
            Error::NoFeasiblePoint => write!(f, "no feasible grid point"),
        }
    }
}

impl core::error::Error for Error {}
