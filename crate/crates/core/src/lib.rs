//! Mixed finite elements for the linear rotating shallow-water equations
//! on triangulated surfaces.
//!
//! Velocity lives in BDFM1, elevation in discontinuous P1 and the
//! streamfunction in continuous P2 enriched with a cubic bubble. The three
//! spaces form an exact sequence under `∇⊥` and `∇·`, which gives exactly
//! steady geostrophic modes and a spectrum without spurious branches.

pub mod analysis;
pub mod dynamics;
pub mod elements;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod output;
pub mod quadrature;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use dynamics::{ModelConfig, SolverKind, State, TraceSystem};
pub use elements::{ElementPair, SpaceKind};
pub use mesh::{CellGeometry, GeometryKind, Mesh};
pub use operators::OperatorSet;
pub use scalar::Scalar;

pub type Mesh64 = Mesh<f64>;
pub type Mesh32 = Mesh<f32>;
