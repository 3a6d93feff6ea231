//! Read-only view of a solved value function for online queries: value,
//! velocity gradient and the field's typical per-cell variation.

use crate::dynamics::StateVec;
use crate::field::{Axis, Sampled, ScalarField};
use crate::solver::ValueFunctionResult;

#[derive(Debug, Clone)]
pub struct ValueFunction {
    field: ScalarField,
    grad_vx: ScalarField,
    grad_vy: ScalarField,
    cell_variation: f64,
}

impl ValueFunction {
    pub fn new(field: ScalarField) -> Self {
        let grad_vx = field.central_difference(Axis::Vx);
        let grad_vy = field.central_difference(Axis::Vy);
        let cell_variation = field.median_cell_variation();
        Self {
            field,
            grad_vx,
            grad_vy,
            cell_variation,
        }
    }

    pub fn from_result(result: &ValueFunctionResult) -> Self {
        Self::new(result.final_field.clone())
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn sample(&self, state: &StateVec) -> Sampled {
        self.field.sample(state)
    }

    pub fn value(&self, state: &StateVec) -> f64 {
        self.field.sample(state).value
    }

    /// Interpolated `(∂φ/∂ẋ, ∂φ/∂ẏ)`, or `None` outside the grid.
    pub fn velocity_gradient(&self, state: &StateVec) -> Option<[f64; 2]> {
        if !self.field.grid().contains(state) {
            return None;
        }
        Some([
            self.grad_vx.sample(state).value,
            self.grad_vy.sample(state).value,
        ])
    }

    /// Median change of φ across one grid cell; the natural unit for guard
    /// bands and tube-depth thresholds.
    pub fn cell_variation(&self) -> f64 {
        self.cell_variation
    }
}
