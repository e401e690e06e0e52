//! File formats and the `osdf` command line on top of [`osdf_core`].
//!
//! - network configs and flow scripts are JSON ([`files`]);
//! - the policy store is a text file, one `<id> <statement>` per line;
//! - simulation logs export as JSON lines ([`export`]).

pub mod cli;
pub mod export;
pub mod files;

pub use osdf_core as core;
