//! Minimax-optimal unit allocations for temporal randomized experiments with
//! habituation, together with the matching estimators and risk calculations.
//!
//! The crate is organised bottom-up:
//!
//! - [`arm`], [`assignment`], [`schedule`]: arms, randomized assignments and
//!   potential-outcome schedules.
//! - [`allocation`]: design objectives, their continuous relaxations and exact
//!   integer solutions.
//! - [`estimators`]: estimands and their randomization estimators.
//! - [`risk`]: losses, Monte-Carlo and worst-case risk, variances and intervals.
//! - [`simulate`]: outcome models and the comparison tables built from them.
//! - [`io`] and [`cli`]: file formats and the command-line front end.

pub mod allocation;
pub mod arm;
pub mod assignment;
pub mod error;
pub mod cli;
pub mod estimators;
pub mod io;
pub mod risk;
pub mod rng;
pub mod schedule;
pub mod simulate;

pub use allocation::{Allocation, ArmCounts, ObjectiveMode, RealAllocation};
pub use arm::{Arm, AssignmentVector, Family};
pub use assignment::{AssignmentMatrix, Permutation};
pub use error::{Error, Result};
pub use estimators::Estimator;
pub use schedule::{ObservedOutcomes, PotentialOutcomeSchedule};
