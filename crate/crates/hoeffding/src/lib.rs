//! Command-line companion to `hoeffding-core`: grids, file formats, parallel
//! Monte Carlo and the verification suites behind the `hoeffding` binary.

pub mod commands;
pub mod config;
pub mod grid;
pub mod output;
pub mod parallel;
pub mod run;
pub mod suites;

pub use hoeffding_core as core;
