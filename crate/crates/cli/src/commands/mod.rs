//! Subcommand implementations.

pub mod compare;
pub mod diagnose;
pub mod fit;
pub mod plotdata;
pub mod simulate;
