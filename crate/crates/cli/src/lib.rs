//! Command-line front end for the `metrotropy` crate.

pub mod app;
pub mod render;
pub mod scan;

pub use app::{run, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_OK};
