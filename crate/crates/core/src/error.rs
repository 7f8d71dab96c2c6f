use thiserror::Error;

use crate::arm::Arm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arm {arm} for horizon T={horizon}: pulse index must lie in 2..=T")]
    InvalidArm { arm: Arm, horizon: usize },

    #[error("horizon must be at least 2, got T={0}")]
    HorizonTooShort(usize),

    #[error("time index t={t} outside 2..={horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },

    #[error("carryover order k must be at least 1")]
    InvalidCarryover,

    #[error("weight rho must lie in [0, 1], got {0}")]
    InvalidWeight(f64),

    #[error("infeasible allocation: N={n} cannot give every one of {arms} arms a unit")]
    Infeasible { n: usize, arms: usize },

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("objective undefined: count for {arm} is {value} (must be positive)")]
    Domain { arm: String, value: f64 },

    #[error("instance too large for exhaustive search: N={n}, T={horizon} (limits N<=60, T<=5)")]
    InstanceTooLarge { n: usize, horizon: usize },

    #[error("solver did not converge after {iterations} iterations (best objective {best_objective})")]
    NonConvergence {
        iterations: usize,
        best_objective: f64,
        best: crate::allocation::RealAllocation,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("schedule has no outcomes for arm {0}")]
    MissingArm(Arm),

    #[error("estimator undefined at t={t}: {group} is empty")]
    EmptyArm { t: usize, group: String },

    #[error("variance undefined at t={t}: {group} has fewer than 2 units")]
    TooFewUnits { t: usize, group: String },

    #[error("the recycling estimator requires a pulse-family assignment")]
    RecyclingRequiresPulse,

    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("invalid outcome box: lower={lower} must be below upper={upper}")]
    DegenerateBox { lower: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("assignment row {row} is not a canonical arm vector")]
    UnknownArmPattern { row: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged CSV: row at line {line} has {found} fields, expected {expected}")]
    Ragged {
        line: u64,
        found: usize,
        expected: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
