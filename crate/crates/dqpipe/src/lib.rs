//! File formats, artifact registry, streaming runtime, serving endpoint and
//! experiment harness around `dqpipe-core`.

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod registry;
pub mod runtime;
pub mod serve;

pub use error::{Error, Result};
