//! Polynomial bases, quadrature and L2 projections on polygonal meshes.

pub mod basis;
pub mod projection;
pub mod quadrature;

pub use basis::{edge_block_size, poly_dim, EdgeBasis, ScaledMonomialBasis};
pub use projection::{ElementProjector, EdgeProjector, ProjectionError, SpdFactor};
pub use quadrature::{
    certify_rule, edge_rule, element_rule, exact_moment, gauss_legendre, gauss_legendre_01,
    polygon_rule, triangle_rule, EdgeRule, QuadRule,
};
