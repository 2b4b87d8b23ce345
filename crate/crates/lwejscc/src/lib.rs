//! File formats, configuration and subcommands for the `lwejscc` binary.
//!
//! The numerical work lives in `lwejscc-core`; this crate adds TOML
//! configuration and key files, PGM/PPM images and CSV reports.

pub mod codecfile;
pub mod commands;
pub mod config;
pub mod keyfile;
pub mod pnm;
pub mod report;
