//! Finite-element machinery at frozen damage.

pub mod assembly;
pub mod element;
pub mod newton;
pub mod shape;
pub mod solver;

pub use assembly::{assemble, reaction_force, AssemblyInput, DofMap, SparsePattern};
pub use element::{element_averages, element_response, mesh_geometry, ElementAverages, ElementGeometry};
pub use newton::{newton_solve, NewtonConfig, NewtonOutcome, NewtonSystem};
pub use solver::LinearSolver;
