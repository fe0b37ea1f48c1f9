//! File formats, MIND ingestion, the pool → train → evaluate pipeline and
//! the `dnnr` command line on top of [`dnnr_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod fsutil;
pub mod ingest;
pub mod pipeline;
pub mod protocol;
pub mod report;
pub mod synth;
pub mod timing;

pub use error::{DnnrError, Result};
