pub mod basis;
pub mod cli;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod excess;
pub mod forecast;
mod linalg;
pub mod simulate;
pub mod solver;
pub mod timeseries;

pub use error::{Error, Result};
