//! Stabilizer-free weak Galerkin finite elements for planar linear
//! elasticity with material interfaces, on general (non-convex) polygonal
//! meshes.
//!
//! The crate is organized around six pieces:
//!
//! * [`mesh`] — interface-fitted polygonal grid families on the unit square,
//! * [`polyquad`] — polynomial bases, quadrature, L2 projections,
//! * [`weakops`] — element-local weak strain / divergence operators and
//!   stiffness blocks,
//! * [`problems`] — manufactured interface problems with exact piecewise
//!   polynomial solutions,
//! * [`system`] — degree-of-freedom layout, constraint elimination, sparse
//!   SPD assembly and linear solvers,
//! * [`studio`] — error norms, convergence studies and the verification
//!   harness behind the CLI.

pub mod mesh;
pub mod polyquad;
pub mod problems;
pub mod studio;
pub mod system;
pub mod vtk;
pub mod weakops;
