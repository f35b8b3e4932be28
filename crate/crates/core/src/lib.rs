pub mod augment;
pub mod config;
pub mod embedding;
pub mod eval;
pub mod fixture;
pub mod limit;
pub mod llm;
pub mod memory;
pub mod persona;
pub mod ranking;
