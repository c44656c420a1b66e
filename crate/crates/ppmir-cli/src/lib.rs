//! Library surface of the ppmir command-line tool; exists so integration
//! tests can drive the service and command plumbing in-process.

pub mod cli;
pub mod service;
