//! File formats, configuration, reports and the `affectkit` command line
//! around [`affectkit_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod render;
pub mod report;

pub use affectkit_core as core;
pub use error::{Error, Result};
