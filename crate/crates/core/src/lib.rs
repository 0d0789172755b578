//! Finite-strain gradient-enhanced damage solver.
//!
//! The mechanical equilibrium is solved with total-Lagrangian 8-node hexahedra
//! at a frozen damage field. The damage function `f` lives on element centroids
//! and is updated afterwards by a Jacobi iteration over the element-wise
//! indicator inequalities, with the Laplacian taken from a second-order Taylor
//! reconstruction over neighbouring centroids. Severely damaged elements are
//! eroded.

pub mod damage;
pub mod driver;
pub mod error;
pub mod fd_laplace;
pub mod fem;
pub mod io;
pub mod material;
pub mod mesh;
pub mod verify;

pub use error::{Error, Result};
