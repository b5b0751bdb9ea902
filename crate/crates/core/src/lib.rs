pub mod column;
pub mod config;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod metrics;
pub mod perception;
pub mod run;

pub use error::{Error, Result};
