//! High-order DG discretization of the incompressible Navier-Stokes equations
//! on structured quadrilateral meshes, with H(div) post-processing and a
//! pressure-correction time integrator.

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod forms;
pub mod krylov;
pub mod mesh;
pub mod projection;
pub mod ripcs;
pub mod rt;

pub use error::{Error, Result};
pub use field::DGField;
pub use forms::{Discretization, FormConfig, Space, VectorFn};
pub use mesh::{Axis, Face, FaceKind, Side, StructuredMesh2D};
pub use rt::{reconstruct_helmholtz_flux, reconstruct_pressure_flux, reconstruct_velocity, rt_divergence, rt_embed_to_dg, RTField};
pub use projection::{HelmholtzResult, Penalty, PenaltyContext, ProjectionVariant, Projector};
pub use ripcs::{run_simulation, DIRKTableau, Ripcs, SplittingState, StepperConfig};
pub use diagnostics::{BenchmarkRecord, ExactSolution};
