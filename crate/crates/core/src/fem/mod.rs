//! Finite-element spaces, shape functions, quadrature, interpolation and the
//! discrete lifting into the porous region.

pub mod basis;
pub mod eval;
pub mod interpolate;
pub mod lifting;
pub mod quadrature;
pub mod space;

pub use basis::{Element, Lagrange, QuadPoint};
pub use quadrature::{EdgeRule, QuadratureRule};
pub use space::{CoupledSpace, DofOffsets, NodeSet, PressureNormalization};
pub use interpolate::{scott_zhang_interpolate, InterpolationError};
pub use lifting::{discrete_lifting, Lifting};
