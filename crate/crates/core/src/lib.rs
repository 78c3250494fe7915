//! Enriched Galerkin (continuous Q1 plus one constant per cell) solver for
//! miscible displacement in porous media and Hele-Shaw cells, with entropy
//! residual stabilization and quadtree mesh adaptation.

pub mod amr;
pub(crate) mod assembly;
pub mod driver;
pub mod egspace;
pub mod flow;
pub mod linalg;
pub mod mesh;
pub mod physics;
pub mod quadrature;
pub mod stabilization;
pub mod transport;

pub use amr::{adapt_and_transfer, mark, AdaptReport, MarkingPolicy, Marks};
pub use driver::{run, DriverError as Error, Scenario, ScenarioConfig, Simulation};
pub use egspace::DofMap;
pub use flow::{Bdf, FaceFlux, FlowBC, FlowBoundary, FlowParams};
pub use linalg::{GmresConfig, SolveStats, SparseMatrix};
pub use mesh::{AdaptBounds, CellId, QuadMesh, Rect, Side};
pub use physics::{DispersionParams, ViscosityModel};
pub use stabilization::{EntropyConfig, EntropyKind, Extrapolation};
pub use transport::{SourceField, TransportBC, TransportParams};
