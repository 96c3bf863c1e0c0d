//! Qubit states, measurement directions and the behaviors they produce under
//! ideal and lossy detection.

mod behavior;
mod state;

pub use behavior::{
    apply_three_outcome, binned_behavior, ideal_behavior, Behavior, DetectionKind, DetectionModel, Scenario,
};
pub use state::{sample_direction, BlochVector, MeasurementFrame, PureState};
