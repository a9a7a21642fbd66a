pub mod config;
pub mod decider;
pub mod eval;
pub mod gateway;
pub mod knowledge;
pub mod model;
pub mod parser;
pub mod pipeline;
pub mod prompting;
