use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::vehicle::{CarControl, CarState};

/// Knot points of one curve section on the uniform grid `tau_k = k / (K - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrajectory {
    pub states: Vec<CarState>,
    pub controls: Vec<CarControl>,
    /// Time-dilation factor: the physical duration of the segment in seconds.
    pub sigma: f64,
}

impl SegmentTrajectory {
    pub fn knots(&self) -> usize {
        self.states.len()
    }

    pub fn tau(&self, k: usize) -> f64 {
        k as f64 / (self.knots() - 1) as f64
    }

    pub fn state_vectors(&self) -> Vec<Vector3<f64>> {
        self.states.iter().map(|s| s.to_vector()).collect()
    }

    pub fn control_vectors(&self) -> Vec<Vector2<f64>> {
        self.controls.iter().map(|u| u.to_vector()).collect()
    }

    pub fn first(&self) -> CarState {
        self.states[0]
    }

    pub fn last(&self) -> CarState {
        self.states[self.states.len() - 1]
    }
}
