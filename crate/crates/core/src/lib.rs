//! Toolkit for generating, linting and proving LLM-written SystemVerilog
//! assertions.

pub mod config;
pub mod flow;
pub mod forge;
pub mod fpv;
pub mod llm;
pub mod prompt;
pub mod rtl;
pub mod rules;
pub mod sva;
