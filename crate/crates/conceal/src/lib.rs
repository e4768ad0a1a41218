//! Block-loss concealment on grayscale images built on `fse-core`: image
//! I/O, loss patterns, the parallel concealment pipeline, CSV reports,
//! benchmarking and the `fse` command-line tool.

pub mod bench;
pub mod cli;
pub mod config;
mod error;
pub mod fft;
pub mod io;
pub mod pattern;
pub mod pipeline;
pub mod report;

pub use error::{ConcealError, Result};
pub use fft::RustFft2d;
pub use pattern::LossPattern;
pub use pipeline::{conceal, Algorithm, ConcealmentReport, PipelineConfig};
