pub mod autocov;
pub mod benchmarks;
pub mod cli;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod simulate;
pub mod solver;
pub mod yule_walker;

pub use error::{Error, Result};
