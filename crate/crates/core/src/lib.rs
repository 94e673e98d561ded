pub mod data_model;
pub mod error;
pub mod inference;
pub mod pipeline;
pub mod screening;
pub mod stats;
pub mod synth;
pub mod trend;

pub use error::{Error, Result};
