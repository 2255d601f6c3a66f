pub mod agent;
pub mod evolution;
pub mod graph;
pub mod harness;
pub mod plan;
pub mod projection;
pub mod scoring;
pub mod search;
pub mod similarity;
