//! Polytopes, triangulation and exact polynomial integration.

mod halfspace;
mod integrate;
pub mod linalg;
mod lp;
mod polynomial;
mod polytope;
mod simplex;
mod triangulate;

pub use halfspace::{HPolytope, Halfspace};
pub use integrate::{
    integrate_exact, integrate_polynomial_over_simplex, integrate_polynomial_over_simplex_exact,
    Field, SimplexIntegrator,
};
pub use lp::{chebyshev_radius, intersect, remove_redundant, vertices, Intersection};
pub use polynomial::{Polynomial, Term};
pub use polytope::{ConvexPolytope, SplitResult, SLIVER_TOL};
pub use simplex::{Simplex, DEGENERACY_TOL};
pub use triangulate::{triangulate, Triangulation};
pub(crate) use triangulate::triangulate_convex;
