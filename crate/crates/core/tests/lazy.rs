mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use detwasm::backend::Tier;
use detwasm::engine::{Engine, EngineConfig, InvokeError, Mode, Priority};
use detwasm::runtime::{InstanceConfig, MemoryMode, Value};

const THREE: &str = r#"
(module
  (func $a (export "a") (param i32) (result i32) (i32.add (local.get 0) (i32.const 1)))
  (func $b (export "b") (param i32) (result i32)
    (local.get 0) (i32.const 2) (i32.mul) (i32.const 3) (i32.add) (i32.const 5) (i32.xor)
    (i32.const 7) (i32.sub) (i32.const 11) (i32.mul) (i32.const 13) (i32.add) (i32.const 17) (i32.xor)
    (i32.const 19) (i32.sub) (i32.const 23) (i32.mul) (i32.const 29) (i32.add) (i32.const 31) (i32.xor)
    (call $a))
  (func $c (export "c") (param i32) (result i32)
    (local.get 0) (i32.const 2) (i32.mul) (i32.const 3) (i32.add) (call $b)))
"#;

fn lazy(p: &Arc<detwasm::dmir::Program>, priority: Priority, workers: usize) -> Engine {
    Engine::new(p.clone(), EngineConfig { workers: Some(workers), priority, ..EngineConfig::new(Mode::Lazy, MemoryMode::GuardPage) })
        .unwrap()
}

fn call(e: &Engine, name: &str, x: i32) -> i32 {
    let mut inst = engine_instance(e, InstanceConfig::default());
    match e.invoke(&mut inst, name, &[Value::I32(x)]).unwrap()[..] {
        [Value::I32(v)] => v,
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn first_call_resolves_stub_once() {
    let p = program(THREE);
    let e = lazy(&p, Priority::Fifo, 0);
    assert_eq!(e.slot_tier(0), None);
    assert_eq!(call(&e, "a", 4), 5);
    assert_eq!(e.stats().stubs_resolved, 1);
    assert_eq!(e.slot_tier(0), Some(Tier::Flat));
    assert_eq!(call(&e, "a", 4), 5);
    assert_eq!(e.stats().stubs_resolved, 1);
    // c calls b calls a: two more stubs.
    let want = call(&engine(&p, Mode::Interp, MemoryMode::GuardPage), "c", 9);
    assert_eq!(call(&e, "c", 9), want);
    assert_eq!(e.stats().stubs_resolved, 3);
    assert!(e.stats().latency_first_invoke_us.is_some());
}

#[test]
fn hot_switch_rules() {
    let p = program(THREE);
    let e = lazy(&p, Priority::Fifo, 0);
    // A stub can be replaced by FLAS code directly; the resolver then finds it.
    assert!(e.hot_switch(1, e.compile(1, Tier::Flas).unwrap()));
    assert_eq!(e.slot_tier(1), Some(Tier::Flas));
    let want = call(&engine(&p, Mode::Interp, MemoryMode::GuardPage), "b", 3);
    assert_eq!(call(&e, "b", 3), want);
    assert_eq!(e.stats().stubs_resolved, 1, "only a went through its stub");
    // Duplicate compilation: the first publication wins.
    assert!(!e.hot_switch(1, e.compile(1, Tier::Flas).unwrap()));
    assert_eq!(e.stats().switches, 1);
    // Flat over flat-or-better is never published.
    assert_eq!(e.slot_tier(0), Some(Tier::Flat));
    assert!(e.hot_switch(0, e.compile(0, Tier::Flas).unwrap()));
    assert_eq!(e.stats().switches, 2);
    assert_eq!(call(&e, "b", 3), want);
}

#[test]
fn priority_orders() {
    let p = program(THREE);
    let fifo = lazy(&p, Priority::Fifo, 0);
    assert_eq!(fifo.stats().priority_order, vec![0, 1, 2]);
    let sized = lazy(&p, Priority::SizeDescending, 0);
    assert_eq!(sized.stats().priority_order, vec![1, 2, 0]);
    assert_eq!(sized.background_step(), Some(1));
    assert_eq!(sized.slot_tier(1), Some(Tier::Flas));
    assert_eq!(sized.background_step(), Some(2));
    assert_eq!(sized.background_step(), Some(0));
    assert_eq!(sized.background_step(), None);
    assert_eq!(sized.stats().background_compiled, 3);
    let explicit = lazy(&p, Priority::Explicit(vec![2, 0, 9]), 0);
    assert_eq!(explicit.stats().priority_order, vec![2, 0]);
}

#[test]
fn shutdown_cancels_and_is_idempotent() {
    let p = program(THREE);
    let e = lazy(&p, Priority::Fifo, 0);
    e.shutdown();
    e.shutdown();
    assert_eq!(e.background_step(), None);
    assert!(!e.hot_switch(2, e.compile(2, Tier::Flas).unwrap()));
    assert_eq!(e.stats().background_compiled, 0);
    assert_eq!(e.slot_tier(2), None);
}

#[test]
fn workers_upgrade_everything() {
    let p = program(THREE);
    let e = lazy(&p, Priority::Fifo, 2);
    let start = Instant::now();
    while (0..3).any(|f| e.slot_tier(f) != Some(Tier::Flas)) {
        assert!(start.elapsed() < Duration::from_secs(30), "background compilation stalled");
        std::thread::sleep(Duration::from_millis(2));
    }
    assert_eq!(e.stats().background_compiled, 3);
    assert_eq!(e.stats().switches, 3);
    assert!(e.metrics().iter().all(|m| m.tier == Tier::Flas && m.code_size_bytes > 0));
    e.shutdown();
}

#[test]
fn results_stable_across_an_upgrade() {
    let p = program(FIB_ITER);
    let e = lazy(&p, Priority::Fifo, 1);
    let mut inst = engine_instance(&e, InstanceConfig::default());
    let mut tiers = Vec::new();
    for i in 0..1000 {
        let r = e.invoke(&mut inst, "fib", &[Value::I32(i % 40)]).unwrap();
        assert_eq!(r, vec![Value::I32(fib_oracle((i % 40) as u32))]);
        tiers.push(e.slot_tier(0));
    }
    assert!(tiers.iter().all(|t| t.is_some()));
}

#[test]
fn engine_shared_between_threads() {
    let p = program(FIB);
    let e = Arc::new(lazy(&p, Priority::Fifo, 1));
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let e = e.clone();
            std::thread::spawn(move || {
                let mut inst = engine_instance(&e, InstanceConfig::default());
                for n in 0..15 {
                    let r = e.invoke(&mut inst, "fib", &[Value::I32(n + t)]).unwrap();
                    assert_eq!(r, vec![Value::I32(fib_oracle((n + t) as u32))]);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    // Racing resolutions of the single function publish at most once.
    assert!(e.stats().stubs_resolved <= 1);
}

#[test]
fn api_misuse_is_reported() {
    let p = program(THREE);
    let other = program(FIB);
    for mode in Mode::ALL {
        let e = engine(&p, mode, MemoryMode::SoftwareCheck);
        let mut inst = engine_instance(&e, InstanceConfig::default());
        let misuse = |r: Result<Vec<Value>, InvokeError>| matches!(r, Err(InvokeError::ApiMisuse(_)));
        assert!(misuse(e.invoke(&mut inst, "zz", &[])));
        assert!(misuse(e.invoke(&mut inst, "a", &[])));
        assert!(misuse(e.invoke(&mut inst, "a", &[Value::I64(1)])));
        let mut foreign = instance(&other, InstanceConfig::default());
        assert!(misuse(e.invoke(&mut foreign, "a", &[Value::I32(1)])));
        if mode != Mode::Interp {
            let mut guard = instance(&p, InstanceConfig { memory_mode: MemoryMode::GuardPage, ..Default::default() });
            assert!(misuse(e.invoke(&mut guard, "a", &[Value::I32(1)])));
        }
    }
}
