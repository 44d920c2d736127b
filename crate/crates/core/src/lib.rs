pub mod cli;
pub mod context;
pub mod engine;
pub mod kernel;
pub mod problem;
pub mod pts;
pub mod search;
