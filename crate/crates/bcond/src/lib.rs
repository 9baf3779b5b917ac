//! File formats, trace output and the `bcond` command-line harness built
//! on [`bcond_core`].

pub mod cli;
pub mod format;
pub mod trace;
