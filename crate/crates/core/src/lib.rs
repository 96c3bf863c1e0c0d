//! Probability of Bell inequality violation with random measurement settings
//! and imperfect detectors.
//!
//! The crate is organised around a single pipeline:
//!
//! 1. [`quantum`] samples Haar-random measurement directions and turns a pure
//!    qubit state plus a detection model into a [`Behavior`] table.
//! 2. [`localpolytope`] decides whether the table admits a local hidden-variable
//!    model by linear-program feasibility, and extracts a violated Bell
//!    functional when it does not.
//! 3. [`montecarlo`] repeats this over many seeded samples and aggregates the
//!    violation frequency with Wilson confidence intervals.
//!
//! [`bounds`] holds closed-form lower bounds for the two-qubit singlet, with two
//! independent numerical oracles, and [`inequalities`] evaluates a handful of
//! named Bell expressions together with their critical efficiencies.

pub mod bounds;
pub mod cli;
pub mod inequalities;
pub mod localpolytope;
pub mod montecarlo;
pub mod parallel;
pub mod quantum;

mod error;
mod numeric;

pub use error::{Error, Result};
pub use localpolytope::{BellFunctional, FeasibilityResult, LpProblem, Verdict};
pub use montecarlo::{EstimateRecord, RunConfig};
pub use quantum::{Behavior, BlochVector, DetectionModel, MeasurementFrame, PureState, Scenario};
