//! Host-function registry and the context handed to host callables.

use std::any::Any;
use std::collections::HashMap;
use std::sync::Arc;

use crate::frontend::types::{FuncType, ValType};
use crate::runtime::memory::LinearMemory;
use crate::runtime::value::Value;

/// Why a host call did not return normally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostFault {
    /// Host-specific failure; only the code reaches the trace.
    Error(String),
    GasExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GasState {
    pub limit: u64,
    pub remaining: u64,
}

impl GasState {
    pub fn new(limit: u64) -> GasState {
        GasState { limit, remaining: limit }
    }

    pub fn consumed(&self) -> u64 {
        self.limit - self.remaining
    }

    /// Deducts `amount`; on shortfall drains to zero and fails.
    pub fn charge(&mut self, amount: u64) -> bool {
        if self.remaining < amount {
            self.remaining = 0;
            false
        } else {
            self.remaining -= amount;
            true
        }
    }
}

pub type HostData = Box<dyn Any + Send>;

pub struct HostContext<'a> {
    gas: &'a mut GasState,
    memory: &'a mut LinearMemory,
    data: &'a mut HostData,
    exhausted: bool,
}

impl<'a> HostContext<'a> {
    pub(crate) fn new(gas: &'a mut GasState, memory: &'a mut LinearMemory, data: &'a mut HostData) -> Self {
        HostContext { gas, memory, data, exhausted: false }
    }

    pub fn consume_gas(&mut self, amount: u64) -> Result<(), HostFault> {
        if self.gas.charge(amount) {
            Ok(())
        } else {
            self.exhausted = true;
            Err(HostFault::GasExhausted)
        }
    }

    pub fn remaining_gas(&self) -> u64 {
        self.gas.remaining
    }

    pub fn memory(&self) -> &LinearMemory {
        self.memory
    }

    pub fn memory_mut(&mut self) -> &mut LinearMemory {
        self.memory
    }

    pub fn data<T: 'static>(&mut self) -> Option<&mut T> {
        self.data.downcast_mut::<T>()
    }

    pub(crate) fn exhausted(&self) -> bool {
        self.exhausted
    }
}

pub type HostCallable = Arc<dyn Fn(&mut HostContext<'_>, &[Value]) -> Result<Vec<Value>, HostFault> + Send + Sync>;

#[derive(Clone)]
pub struct HostFunc {
    pub sig: FuncType,
    pub callable: HostCallable,
}

type InitFn = Arc<dyn Fn() -> HostData + Send + Sync>;
type DestroyFn = Arc<dyn Fn(HostData) + Send + Sync>;

/// Immutable once handed to an engine or instance.
#[derive(Clone, Default)]
pub struct HostRegistry {
    funcs: HashMap<(String, String), HostFunc>,
    globals: HashMap<(String, String), Value>,
    init: Option<InitFn>,
    destroy: Option<DestroyFn>,
}

impl HostRegistry {
    pub fn new() -> HostRegistry {
        HostRegistry::default()
    }

    pub fn register<F>(&mut self, module: &str, name: &str, sig: FuncType, f: F) -> &mut Self
    where
        F: Fn(&mut HostContext<'_>, &[Value]) -> Result<Vec<Value>, HostFault> + Send + Sync + 'static,
    {
        self.funcs.insert((module.into(), name.into()), HostFunc { sig, callable: Arc::new(f) });
        self
    }

    pub fn register_global(&mut self, module: &str, name: &str, value: Value) -> &mut Self {
        self.globals.insert((module.into(), name.into()), value);
        self
    }

    /// Per-instance context creation and teardown.
    pub fn on_instance(
        &mut self,
        init: impl Fn() -> HostData + Send + Sync + 'static,
        destroy: impl Fn(HostData) + Send + Sync + 'static,
    ) -> &mut Self {
        self.init = Some(Arc::new(init));
        self.destroy = Some(Arc::new(destroy));
        self
    }

    pub fn func(&self, module: &str, name: &str) -> Option<&HostFunc> {
        self.funcs.get(&(module.to_string(), name.to_string()))
    }

    pub fn global(&self, module: &str, name: &str) -> Option<Value> {
        self.globals.get(&(module.to_string(), name.to_string())).copied()
    }

    pub(crate) fn init_data(&self) -> HostData {
        match &self.init {
            Some(f) => f(),
            None => Box::new(()),
        }
    }

    pub(crate) fn destroy_data(&self, data: HostData) {
        if let Some(f) = &self.destroy {
            f(data)
        }
    }

    /// Deterministic mock hosts used by the CLI and tests, all under `env`:
    ///
    /// - `use_gas(i64)`: consumes the given amount of gas
    /// - `fail()`: raises a host error
    /// - `echo_i32(i32) -> i32`, `echo_i64(i64) -> i64`
    /// - `mem_sum(ptr: i32, len: i32) -> i64`: sum of memory bytes, costs `len` gas
    /// - `counter() -> i64`: per-instance counter starting at 1
    /// - global `seed: i32` = 7
    pub fn with_mocks() -> HostRegistry {
        use ValType::*;
        let mut r = HostRegistry::new();
        r.register("env", "use_gas", FuncType::new([I64], []), |cx, args| {
            let Value::I64(n) = args[0] else { unreachable!() };
            cx.consume_gas(n as u64)?;
            Ok(vec![])
        });
        r.register("env", "fail", FuncType::new([], []), |_, _| Err(HostFault::Error("mock failure".into())));
        r.register("env", "echo_i32", FuncType::new([I32], [I32]), |_, args| Ok(vec![args[0]]));
        r.register("env", "echo_i64", FuncType::new([I64], [I64]), |_, args| Ok(vec![args[0]]));
        r.register("env", "mem_sum", FuncType::new([I32, I32], [I64]), |cx, args| {
            let (Value::I32(p), Value::I32(n)) = (args[0], args[1]) else { unreachable!() };
            cx.consume_gas(n as u32 as u64)?;
            let bytes = cx
                .memory()
                .read(p as u32 as u64, n as u32 as u64)
                .ok_or_else(|| HostFault::Error("range outside memory".into()))?;
            Ok(vec![Value::I64(bytes.iter().map(|&b| b as i64).sum())])
        });
        r.register("env", "counter", FuncType::new([], [I64]), |cx, _| {
            let c = cx.data::<i64>().ok_or_else(|| HostFault::Error("no context".into()))?;
            *c += 1;
            Ok(vec![Value::I64(*c)])
        });
        r.register_global("env", "seed", Value::I32(7));
        r.on_instance(|| Box::new(0i64), |_| {});
        r
    }
}
