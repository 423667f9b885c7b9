pub mod detect;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod remote;
pub mod rng;
pub mod syntax;
pub mod token;
pub mod tokenizer;
