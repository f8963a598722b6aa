//! Deterministic middle IR: lowering, passes, metering.

pub mod dump;
pub mod eval;
pub mod hooks;
pub mod ir;
pub mod lower;
pub mod meter;
pub mod passes;
pub mod program;
pub mod verify;

pub use hooks::{recognize_checked_hook, HookInt, HookKind, HookOp};
pub use ir::{Block, BlockId, DmirFunction, Inst, Reg, Terminator};
pub use lower::lower_to_dmir;
pub use meter::{insert_gas_metering, CostModel};
pub use passes::{run_passes, Pass};
pub use program::Program;
