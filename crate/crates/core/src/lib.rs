//! Culture-specific item (CSI) identification, recipe retrieval, prompting
//! and evaluation for Chinese dish names.

pub mod backends;
pub mod comet;
pub mod config;
pub mod corpus;
pub mod exec;
pub mod eval;
pub mod identify;
pub mod ingest;
pub mod pipeline;
pub mod prompt;
pub mod retrieval;
pub mod segment;
