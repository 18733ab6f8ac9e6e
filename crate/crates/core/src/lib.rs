//! Statistical model checking for networks of priced timed automata.
//!
//! The pipeline is: [`parser`] reads models and queries, [`model`] holds the
//! instantiated network, [`sim`] draws random runs, [`monitor`] classifies
//! them, [`stat`] decides, [`runner`] orchestrates and [`output`] turns the
//! numbers into plot data.

pub mod model;
pub mod monitor;
pub mod output;
pub mod parser;
pub mod query;
pub mod runner;
pub mod sim;
pub mod stat;
