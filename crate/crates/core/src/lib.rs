//! Numerical laboratory for bubbling solutions of the mean field equation
//! with a pair of collapsing vortices on the flat unit torus.

pub mod base_state;
pub mod bubble_ansatz;
pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod geom;
pub mod greens;
pub mod io;
pub mod krylov;
pub mod liouville;
pub mod quad;
pub mod reduction;
pub mod spectral;

pub use error::{Error, Result};
