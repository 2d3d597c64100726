pub mod analysis;
pub mod benchmark;
pub mod catalog;
pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod runner;
