//! Joint estimation of sparse Gaussian precision matrices across related
//! classes, with covariance screening that splits the problem into small
//! independent blocks before the solver runs.

pub mod datagen;
pub mod error;
pub mod io;
pub mod matrix;
pub mod screening;
pub mod solver;
mod union_find;
pub mod validation;

pub use error::{Error, Result};
