//! File formats, check-in ingestion and the `hawkesnet` command-line tool
//! built on [`hawkesnet_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod ingest;
pub mod io;
pub mod provenance;

pub use error::{Error, Result};
