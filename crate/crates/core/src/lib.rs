//! Numerical laboratory for weighted light-cone decay of the tangential
//! derivative `D_{+,c}`, null-form identities built from `{∂_a, Ω_jk}`, and
//! null versus non-null quadratic wave systems in three space dimensions.

pub mod error;
pub mod fields;
pub mod nullforms;
pub mod jet;
pub mod linsolve;
pub mod weights;
pub mod decaylab;
pub mod nonlinear;
pub mod cli;

pub use error::{Error, Result};
pub use fields::{Point, ScalarField, VectorFieldOp};
pub use jet::Jet;
