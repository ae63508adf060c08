//! Numerical pseudohermitian geometry in dimension three.

pub mod error;
pub mod fields;
pub mod jet;

pub use error::{CrError, Result};
pub use fields::{Chart, CoordForm, Field};
pub use num_complex::Complex64 as C64;
pub mod phstructure;
pub mod sampling;
pub mod operators;
pub mod flows;
pub mod fillability;
pub mod embedded;
pub mod selftest;
