//! Config parsing, output writing and subcommands behind the `ebsurf` binary.

pub mod commands;
pub mod config;
pub mod output;
