//! Library side of the `odl` binary: config parsing, single-run execution,
//! parallel sweeps, and the offline analysis commands. The binary in
//! `main.rs` is a thin argument-parsing shell over these modules.

pub mod analyze;
pub mod config;
pub mod run;
pub mod sweep;
