//! File formats, experiment driver and reports around `embfuse-core`.

pub mod artifact;
pub mod dataset_io;
pub mod driver;
pub mod embf;
mod error;
pub mod report;
pub mod settings;
pub mod theory;
pub mod wordvec_io;

pub use error::{Error, Result};
