//! Projected gradient descent for recovering structured signals from
//! underdetermined linear measurements `y = Ax + w`.
//!
//! The numerical core ([`operators`], [`constraints`], [`solver`]) is generic
//! over the scalar type through [`Scalar`]; `f64` and `f32` aliases are
//! exported below. The closed-form theory in [`geometry`] and the experiment
//! harness in [`experiments`] work in `f64`.

pub mod constraints;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod operators;
pub mod scalar;
pub mod seed;
pub mod solver;

pub use constraints::{ConstraintSet, Denoiser, Penalty, SoftThreshold};
pub use error::{Error, Result};
pub use operators::{DenseOperator, Ensemble, MeasurementOperator, SorsOperator, Transform};
pub use scalar::Scalar;
pub use solver::{SolveStatus, SolverConfig, StepRegime, Trace, TraceRecord};

pub type DenseOperatorF64 = DenseOperator<f64>;
pub type DenseOperatorF32 = DenseOperator<f32>;
pub type SorsOperatorF64 = SorsOperator<f64>;
pub type SorsOperatorF32 = SorsOperator<f32>;
pub type ConstraintSetF64 = ConstraintSet<f64>;
pub type ConstraintSetF32 = ConstraintSet<f32>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type TraceF64 = Trace<f64>;
pub type TraceF32 = Trace<f32>;
