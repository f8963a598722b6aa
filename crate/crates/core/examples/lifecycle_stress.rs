//! Repeated create/run/shutdown of lazy engines with live background
//! workers. Exits 1 if any result is wrong or anything is published after
//! shutdown returns. Meant to run under sanitizers or valgrind.

use std::sync::Arc;

use detwasm::dmir::Program;
use detwasm::engine::{Engine, EngineConfig, Mode};
use detwasm::frontend::DwasmLimits;
use detwasm::runtime::{HostRegistry, InstanceConfig, MemoryMode, Value};

// main(x) = (x*3+1)*7 through three functions; the rest is work for the compile workers.
const MODULE: &str = r#"
(module
  (func $c (param i32) (result i32) (i32.mul (local.get 0) (i32.const 7)))
  (func $b (param i32) (result i32) (call $c (i32.add (local.get 0) (i32.const 1))))
  (func (export "main") (param i32) (result i32) (call $b (i32.mul (local.get 0) (i32.const 3))))
  (func $w1 (param i64) (result i64)
    (local.get 0) (i64.const 3) (i64.mul) (i64.const 5) (i64.xor) (i64.const 7) (i64.add) (i64.const 11) (i64.rotl)
    (i64.const 13) (i64.mul) (i64.const 17) (i64.xor) (i64.const 19) (i64.add) (i64.const 23) (i64.rotl))
  (func $w2 (param i64) (result i64) (call $w1 (call $w1 (local.get 0))))
  (func $w3 (param i64) (result i64) (call $w2 (call $w2 (local.get 0))))
  (func $w4 (param i64) (result i64) (call $w3 (call $w3 (local.get 0)))))
"#;

fn main() {
    let cycles: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let program = Arc::new(Program::from_bytes(&wat::parse_str(MODULE).expect("wat"), &DwasmLimits::default()).expect("valid module"));
    let nfuncs = program.module().total_funcs();
    let registry = Arc::new(HostRegistry::new());
    let mut failures = 0;
    for i in 0..cycles {
        let mm = if i % 2 == 0 { MemoryMode::GuardPage } else { MemoryMode::SoftwareCheck };
        let engine = Engine::new(program.clone(), EngineConfig { workers: Some(2), ..EngineConfig::new(Mode::Lazy, mm) })
            .expect("engine");
        let mut inst = engine.instantiate(registry.clone(), InstanceConfig::default()).expect("instance");
        let x = i as i32;
        let r = engine.invoke(&mut inst, "main", &[Value::I32(x)]);
        let want = x.wrapping_mul(3).wrapping_add(1).wrapping_mul(7);
        if r != Ok(vec![Value::I32(want)]) {
            eprintln!("cycle {i}: got {r:?}, want {want}");
            failures += 1;
        }
        if i % 3 == 0 {
            std::thread::yield_now();
        }
        engine.shutdown();
        let before = engine.stats();
        let tiers: Vec<_> = (0..nfuncs).map(|f| engine.slot_tier(f)).collect();
        std::thread::yield_now();
        let late = engine.compile(0, detwasm::backend::Tier::Flas).map(|a| engine.hot_switch(0, a));
        let after = engine.stats();
        let tiers_after: Vec<_> = (0..nfuncs).map(|f| engine.slot_tier(f)).collect();
        if before != after || tiers != tiers_after || late != Ok(false) {
            eprintln!("cycle {i}: publication after shutdown");
            failures += 1;
        }
        drop(inst);
        drop(engine);
    }
    println!("cycles={cycles} failures={failures}");
    std::process::exit(if failures == 0 { 0 } else { 1 });
}
