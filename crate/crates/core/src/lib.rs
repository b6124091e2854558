//! Constructive ingredients of nonexistence results for semilinear Dirichlet
//! problems on negatively curved spaces, computed in the model `H^n(-κ)`.
//!
//! The modules follow the order in which the pieces are used:
//! [`hypgeo`] for geometry, [`boundary`] for visual metrics and dimension,
//! [`barrier_ode`] and [`barriers`] for supersolutions, [`scooping`] for the
//! convex scooping construction, [`nonexistence`] for the covering budget and
//! [`pde_lab`] for finite-difference experiments on the Poincaré disk.

pub mod barrier_ode;
pub mod barriers;
pub mod boundary;
pub mod checks;
pub mod error;
pub mod hypgeo;
pub mod io;
pub mod linalg;
pub mod nonexistence;
pub mod pde_lab;
pub mod scooping;
pub mod stats;

pub use error::{Error, Result};

/// The guide in `book/`, compiled so that its snippets run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    pub mod geometry {}
    #[doc = include_str!("../../../book/src/barrier-profile.md")]
    pub mod barrier_profile {}
    #[doc = include_str!("../../../book/src/barriers.md")]
    pub mod barriers {}
    #[doc = include_str!("../../../book/src/boundary.md")]
    pub mod boundary {}
    #[doc = include_str!("../../../book/src/scooping.md")]
    pub mod scooping {}
    #[doc = include_str!("../../../book/src/covering.md")]
    pub mod covering {}
    #[doc = include_str!("../../../book/src/pde-lab.md")]
    pub mod pde_lab {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
