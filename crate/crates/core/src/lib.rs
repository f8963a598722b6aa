//! Deterministic WebAssembly execution engine.

pub mod dmir;
pub mod frontend;
pub mod interp;
pub mod runtime;
pub mod backend;
pub mod engine;
