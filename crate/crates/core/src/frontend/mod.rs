//! Binary decoding and dWasm validation.

pub mod ast;
pub mod decode;
pub mod error;
pub mod limits;
pub mod ops;
pub mod reader;
pub mod types;
pub mod validate;

pub use ast::ModuleAst;
pub use decode::decode_module;
pub use error::{ValidationCode, ValidationError};
pub use limits::DwasmLimits;
pub use types::{FuncType, ValType};
pub use validate::{compute_frame_weight, validate_dwasm, ValidatedModule};

/// Decode and validate in one step.
pub fn load(bytes: &[u8], limits: &DwasmLimits) -> Result<ValidatedModule, ValidationError> {
    validate_dwasm(decode_module(bytes)?, limits)
}
