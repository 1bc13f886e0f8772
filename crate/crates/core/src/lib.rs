//! Numerical laboratory for weighted manifolds: space forms with densities,
//! simplicial meshes, drift Laplacians, and checks of isoperimetric and
//! eigenvalue inequalities for hypersurfaces.

pub mod density;
pub mod error;
pub mod heintze;
pub mod lab;
pub mod mesh;
pub mod ops;
pub mod quadrature;
pub mod reilly;
pub mod report;
pub mod spaceform;
pub mod sparse;
pub mod spectrum;

pub use error::{LabError, Result};
