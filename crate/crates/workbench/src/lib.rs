//! Command line, simulator and HTTP front end for grammatical workflows.

pub mod cli;
pub mod service;
pub mod sim;
pub mod store;
