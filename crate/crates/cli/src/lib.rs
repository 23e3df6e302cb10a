//! Command-line surface of `trd-core`: PGM images, JSON model files, run
//! manifests, dataset preparation and the `trd` commands.

pub mod app;
pub mod dataset;
mod error;
pub mod instances;
pub mod manifest;
pub mod modelfile;
pub mod pgm;

pub use error::CliError;
