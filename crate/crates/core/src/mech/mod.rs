//! Mechanism data model, design parameterization and kinematic constraints.

mod constraints;
mod dims;
mod polygon;
mod topology;

pub use constraints::{
    box_violation, grashof_margin, link_ratios, quick_return_ratio, ConstraintFlags, ConstraintLimits,
    ConstraintReport, DEFAULT_DELTA_QRR, DEFAULT_GRASHOF_OFFSET,
};
pub use dims::{design_from_dims, dims_from_design, dims_of, AssemblyError, DimEntry, DimKind, DimensionVector};
pub use polygon::{ConvexPolygon, GeometryError};
pub use topology::{
    validate_topology, DesignError, DesignLayout, DesignVector, InputStage, Mechanism, MechanismTopology,
    Member, MemberKind, Node, ResolvedMember, ResolvedTernary, SliderAxis, SliderConstraint, StageGeometry,
    Ternary, TopologyError, TopologyErrors, SCHEMA_VERSION,
};
