//! Simulation and design toolkit for single-DOF planar flapping mechanisms.
//!
//! The pipeline runs a quasistatic truss model of the linkage over one crank
//! revolution, turns the output-link motion into a sweep profile, drives a 2D
//! unsteady vortex-lattice chord model with it and reduces the chord
//! coefficients to wing lift, torque and power. Optimizer and tolerance layers
//! sit on top of [`pipeline::evaluate_design`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fem;
pub mod loads;
pub mod mech;
pub mod optimize;
pub mod pipeline;
pub mod spline;
pub mod sweep;
pub mod tolerance;
pub mod uvlm;

pub use fem::{simulate_revolution, FemParams, LinkageTrace};
pub use loads::{FlapEnvironment, LoadResult, WingMorphology};
pub use mech::{
    validate_topology, ConstraintReport, DesignVector, DimensionVector, Mechanism,
    MechanismTopology,
};
pub use optimize::{OptimizationConfig, ParetoArchive};
pub use pipeline::{evaluate_design, Evaluation, FailureTag, PipelineConfig};
pub use sweep::SweepProfile;
pub use tolerance::{RobustnessReport, ToleranceBand};
pub use uvlm::{AeroCoefficients, UvlmParams};

/// 2-vector used for nodal and vortex positions.
pub type Vec2 = nalgebra::Vector2<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
