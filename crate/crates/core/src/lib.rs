//! Stationary viscous mean field games with local focusing or defocusing
//! coupling on the flat torus in one and two dimensions.
//!
//! The crate solves
//!
//! ```text
//! -lap u + H(grad u) + lambda = V -/+ f(m)
//! -lap m - div(grad H(grad u) m) = 0,   integral m = 1,  m > 0
//! ```
//!
//! with `H(p) = |p|^gamma / gamma` and `f(m) = c_f m^alpha`, and ships a set of
//! independent checks of the computed triple `(u, lambda, m)`.

pub mod error;
pub mod fokker_planck;
pub mod grid;
pub mod hjb;
pub mod io;
pub mod linalg;
pub mod mfg;
pub mod model;
pub mod validation;

pub use error::{Error, Result};
