#![allow(dead_code)]

pub mod gen;

use std::sync::Arc;

use detwasm::dmir::Program;
use detwasm::frontend::DwasmLimits;
use detwasm::interp;
use detwasm::engine::{Engine, EngineConfig, InvokeError, Mode};
use detwasm::runtime::{trace_line, HostRegistry, Instance, InstanceConfig, MemoryMode, Trap, Value};

pub fn program(wat: &str) -> Arc<Program> {
    let bytes = wat::parse_str(wat).expect("wat");
    Arc::new(Program::from_bytes(&bytes, &DwasmLimits::default()).expect("valid"))
}

pub fn instance(p: &Arc<Program>, config: InstanceConfig) -> Instance {
    Instance::new(p.clone(), Arc::new(HostRegistry::with_mocks()), config).expect("instantiate")
}

/// Runs an export on a fresh instance under the reference interpreter.
pub fn interp_run(wat: &str, name: &str, args: &[Value]) -> Result<Vec<Value>, Trap> {
    let p = program(wat);
    let mut inst = instance(&p, InstanceConfig::default());
    interp_call(&mut inst, name, args)
}

pub fn interp_call(inst: &mut Instance, name: &str, args: &[Value]) -> Result<Vec<Value>, Trap> {
    let f = inst.program().export(name).expect("export");
    inst.reset_gas();
    interp::invoke_index(inst, f, args, None)
}

pub const FIB: &str = r#"
(module
  (func $fib (export "fib") (param $n i32) (result i32)
    local.get $n
    i32.const 2
    i32.lt_u
    if (result i32)
      local.get $n
    else
      local.get $n
      i32.const 1
      i32.sub
      call $fib
      local.get $n
      i32.const 2
      i32.sub
      call $fib
      i32.add
    end))
"#;

pub const FIB_ITER: &str = r#"
(module
  (func (export "fib") (param $n i32) (result i32) (local $a i32) (local $b i32) (local $t i32)
    i32.const 1
    local.set $b
    block
      loop
        local.get $n
        i32.eqz
        br_if 1
        local.get $a
        local.get $b
        i32.add
        local.set $t
        local.get $b
        local.set $a
        local.get $t
        local.set $b
        local.get $n
        i32.const 1
        i32.sub
        local.set $n
        br 0
      end
    end
    local.get $a))
"#;

pub fn fib_oracle(n: u32) -> i32 {
    let (mut a, mut b) = (0i32, 1i32);
    for _ in 0..n {
        (a, b) = (b, a.wrapping_add(b));
    }
    a
}

pub fn engine(p: &Arc<Program>, mode: Mode, mm: MemoryMode) -> Engine {
    Engine::new(p.clone(), EngineConfig { workers: Some(0), ..EngineConfig::new(mode, mm) }).expect("engine")
}

pub fn engine_instance(e: &Engine, config: InstanceConfig) -> Instance {
    e.instantiate(Arc::new(HostRegistry::with_mocks()), config).expect("instantiate")
}

/// Trace line for one invocation on a fresh instance.
pub fn trace(p: &Arc<Program>, mode: Mode, mm: MemoryMode, config: InstanceConfig, name: &str, args: &[Value]) -> String {
    let e = engine(p, mode, mm);
    let mut inst = engine_instance(&e, config);
    trace_on(&e, &mut inst, name, args)
}

pub fn trace_on(e: &Engine, inst: &mut Instance, name: &str, args: &[Value]) -> String {
    let r = match e.invoke(inst, name, args) {
        Ok(v) => Ok(v),
        Err(InvokeError::Trap(t)) => Err(t),
        Err(other) => panic!("{other}"),
    };
    trace_line(&r, inst.gas().consumed(), inst.memory_hash())
}

pub const MODES: [(Mode, MemoryMode); 8] = [
    (Mode::Interp, MemoryMode::GuardPage),
    (Mode::Interp, MemoryMode::SoftwareCheck),
    (Mode::EagerFlat, MemoryMode::GuardPage),
    (Mode::EagerFlat, MemoryMode::SoftwareCheck),
    (Mode::EagerFlas, MemoryMode::GuardPage),
    (Mode::EagerFlas, MemoryMode::SoftwareCheck),
    (Mode::Lazy, MemoryMode::GuardPage),
    (Mode::Lazy, MemoryMode::SoftwareCheck),
];

/// Runs `f` on a thread with a large stack; deep guest recursion uses the native stack.
pub fn big_stack<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    std::thread::Builder::new().stack_size(512 << 20).spawn(f).unwrap().join().unwrap()
}
