//! Desk-scale laboratory for endpoint Alexandrov–Bakelman–Pucci estimates of
//! the Laplacian.
//!
//! The crate discretizes planar and spatial domains on uniform grids, samples
//! closed-form test functions on them, and evaluates both sides of the
//! classical `L^s` bound, the Lorentz `L^{n/2,1}` endpoint in three
//! dimensions, and the logarithmic-kernel endpoint in the plane (with its
//! inradius refinement). A Brownian-motion Monte Carlo engine with an
//! absorbing boundary checks the probabilistic ingredients: the Feynman–Kac
//! representation and the exit-probability bounds.
//!
//! Data-parallel loops (kernel sums, path simulation, solver sweeps) go
//! through [`exec::Exec`]; with the default `parallel` feature they run on
//! rayon, otherwise sequentially. Results never depend on the worker count.

pub mod elliptic;
pub mod error;
pub mod exec;
pub mod field;
pub mod geometry;
pub mod kernels;
pub mod norms;
pub mod special;
pub mod stochastic;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{ScalarField, TestFunction};
pub use geometry::{DomainSpec, GridDomain, Point, Shape};
