//! Maslov-type indices, iteration inequalities and Galerkin critical point
//! search for periodic Hamiltonian systems.

pub mod coefficient;
pub mod corpus;
pub mod error;
mod extended;
pub mod flow;
pub mod index;
pub mod iteration;
pub mod linking;
pub mod loops;
pub mod models;
pub mod solver;
pub mod symplectic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/symplectic-paths.md")]
    mod symplectic_paths {}
    #[doc = include_str!("../../../book/src/index-pair.md")]
    mod index_pair {}
    #[doc = include_str!("../../../book/src/iteration.md")]
    mod iteration {}
    #[doc = include_str!("../../../book/src/loop-space.md")]
    mod loop_space {}
    #[doc = include_str!("../../../book/src/critical-points.md")]
    mod critical_points {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
}
