//! Mixed finite elements for the three-field Biot consolidation model with
//! residual a posteriori error estimators.
//!
//! Displacement uses vector P1 plus edge bubbles, pressure P0 and flux
//! lowest-order Raviart-Thomas, on uniform triangulations of the unit
//! square. Time stepping is backward Euler.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod elements;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod heat;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod stepper;

pub use assembly::{Coefficients, Discretization, FormMatrices, Permeability, VProjection};
pub use error::{Error, Result};
pub use estimators::{CoupledEstimator, EstimatorOptions, EstimatorReport};
pub use harness::{run_study, StudyConfig, StudyKind, StudyResult, TauRule};
pub use manufactured::{BenchmarkSolution, ExactSolution};
pub use mesh::{uniform_unit_square, BoundaryTag, Diagonal, TriMesh};
pub use stepper::{BiotStepper, DiscreteState, HeatStepper, TimeGrid};
