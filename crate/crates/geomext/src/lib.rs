//! File formats, the `geomext` command-line pipeline and the replicate
//! study runner around `geomext-core`.

pub mod config;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod study;
