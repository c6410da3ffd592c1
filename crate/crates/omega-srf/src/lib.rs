//! Weighted Riemannian calculus on finite-difference grids, the Ω-soliton
//! Ricci flow in its metric, H and A forms, Perelman's W functional and a
//! finite-difference checker for the variation identities of the flow.

pub mod domain_grid;
pub mod error;
pub mod identity_verifier;
pub mod metric_space_geometry;
pub mod riemann_ops;
pub mod srf_flow;
pub mod w_functional;
pub mod testbeds;

pub use error::{Result, SrfError};

/// Crate version, embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
