//! Finite-element solver for steady Navier-Stokes flow coupled to Darcy flow
//! through a Beavers-Joseph-Saffman interface, with tools to check energy
//! estimates, inf-sup stability and uniqueness numerically.

pub mod analysis;
pub mod assembly;
pub mod fem;
pub mod gmsh;
pub mod mesh;
pub mod mms;
pub mod model;
pub mod solver;
pub mod sparse;
pub mod vtk;

pub use fem::{CoupledSpace, PressureNormalization};
pub use mesh::{build_rectangle_mesh, BoundaryTag, BoxMesh, MeshError, MixedMesh, Subdomain};
pub use model::{ModelError, ModelParams};
