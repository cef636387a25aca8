//! Low-energy resolvent laboratory for radial Schrödinger operators on ℝⁿ
//! and on exact cones.

pub mod cone_model;
pub mod error;
pub mod expansion_lab;
pub mod fit;
pub mod index_algebra;
pub mod ode;
pub mod quad;
pub mod radial_lab;
pub mod riesz_lab;
pub mod specfun;

pub use error::{Error, Result};
