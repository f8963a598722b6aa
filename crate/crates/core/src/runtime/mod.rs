//! Instance state shared by the interpreter and compiled code.

pub mod host;
pub mod instance;
pub mod memory;
pub mod trap;
pub mod value;
pub mod vmctx;

pub use host::{GasState, HostContext, HostFault, HostRegistry};
pub use instance::{Instance, InstanceConfig, InstantiationError};
pub use memory::{LinearMemory, MemoryMode};
pub use trap::{Trap, TrapCode};
pub use value::Value;

/// One trace line for the outcome of an invocation.
pub fn trace_line(result: &Result<Vec<Value>, Trap>, gas_consumed: u64, memhash: u64) -> String {
    match result {
        Ok(vals) => {
            let mut s = String::from("OK");
            for v in vals {
                s.push_str(&format!(" {v}"));
            }
            format!("{s} gas={gas_consumed} memhash={memhash:016x}")
        }
        Err(t) => format!("TRAP {} gas={}", t.code, t.gas_consumed),
    }
}
