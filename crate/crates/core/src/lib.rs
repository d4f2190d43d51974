//! Two-grid fixed-stress poroelasticity on non-matching tetrahedral meshes.
//!
//! Flow is solved with cell-centered finite volumes on one tet mesh and
//! quasi-static elasticity with linear finite elements on another. Pressure
//! is transferred to the mechanics grid and volumetric strain and stress back
//! to the flow grid through volume-weighted operators built from vertex
//! containment tests. [`mandel`] carries the analytic Mandel solution used to
//! verify the coupled scheme.

pub mod coupling;
pub mod flow;
pub mod geometry;
pub mod mandel;
pub mod material;
pub mod mechanics;
pub mod mesh;
pub mod sparse;

pub use coupling::{
    CoupledState, CouplingConfig, CouplingError, Probe, ProbeSeries, RunOutput, Simulation,
    TimeSchedule,
};
pub use flow::{FlowBcSpec, FlowBoundary, FlowState};
pub use geometry::{ElementPair, ProjectionDiagnostics, ProjectionOperator, Tet};
pub use mandel::{FineGrid, MandelConfig, MandelReport};
pub use material::{BiotModulus, PoroelasticMaterial};
pub use mechanics::{Axis, MechBcSpec, MechBoundary, MechState};
pub use mesh::{FvGrid, HexSplit, TetMesh};
