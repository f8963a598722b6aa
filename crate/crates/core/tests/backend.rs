mod common;

use common::*;
use detwasm::backend::{compile_function, Tier};
use detwasm::engine::Mode;
use detwasm::runtime::{InstanceConfig, MemoryMode, TrapCode, Value};

const MEM: &str = r#"
(module
  (memory 1 3)
  (func (export "load") (param i32) (result i32) (i32.load (local.get 0)))
  (func (export "grow") (param i32) (result i32) (memory.grow (local.get 0)))
  (func (export "store") (param i32 i32) (i32.store offset=8 (local.get 0) (local.get 1))))
"#;

#[test]
fn metrics_name_tier_and_size() {
    let p = program(FIB);
    for tier in [Tier::Flat, Tier::Flas] {
        let a = compile_function(&p, 0, tier, MemoryMode::GuardPage).unwrap();
        assert_eq!((a.metrics.func_index, a.metrics.tier, a.tier()), (0, tier, tier));
        assert!(a.metrics.code_size_bytes > 0);
    }
}

#[test]
fn eager_engine_records_one_metric_per_function() {
    let p = program(MEM);
    for mode in [Mode::EagerFlat, Mode::EagerFlas] {
        let e = engine(&p, mode, MemoryMode::SoftwareCheck);
        let mut m = e.metrics();
        m.sort_by_key(|m| m.func_index);
        assert_eq!(m.iter().map(|m| m.func_index).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(m.iter().all(|m| m.tier == if mode == Mode::EagerFlat { Tier::Flat } else { Tier::Flas }));
    }
}

#[test]
fn folding_shrinks_optimized_code() {
    let body = "(i32.add (i32.const 1) (i32.const 2)) ".repeat(64) + &"i32.add ".repeat(63);
    let p = program(&format!(r#"(module (func (export "f") (result i32) {body}))"#));
    let flat = compile_function(&p, 0, Tier::Flat, MemoryMode::GuardPage).unwrap();
    let flas = compile_function(&p, 0, Tier::Flas, MemoryMode::GuardPage).unwrap();
    assert!(flas.metrics.code_size_bytes < flat.metrics.code_size_bytes);
}

#[test]
fn out_of_bounds_detail_matches_across_strategies() {
    let p = program(MEM);
    for mode in [Mode::EagerFlat, Mode::EagerFlas] {
        let details: Vec<_> = [MemoryMode::GuardPage, MemoryMode::SoftwareCheck]
            .into_iter()
            .map(|mm| {
                let e = engine(&p, mode, mm);
                let mut inst = engine_instance(&e, InstanceConfig::default());
                let mut out = vec![];
                for addr in [65534, 65536, -1] {
                    let t = e.invoke(&mut inst, "load", &[Value::I32(addr)]).unwrap_err();
                    let t = t.trap().unwrap();
                    assert_eq!(t.code, TrapCode::MemoryAccessOutOfBounds);
                    out.push(t.detail);
                }
                out
            })
            .collect();
        assert_eq!(details[0], details[1]);
        assert_eq!(details[0], [Some(65536), Some(65536), Some(0xFFFF_FFFF)]);
    }
}

#[test]
fn grown_memory_is_visible_to_compiled_code() {
    let p = program(MEM);
    for (mode, mm) in MODES {
        let e = engine(&p, mode, mm);
        let mut inst = engine_instance(&e, InstanceConfig::default());
        let top = Value::I32(2 * 65536 - 12);
        assert!(e.invoke(&mut inst, "store", &[top, Value::I32(5)]).is_err(), "{mode:?}/{mm:?}");
        assert_eq!(e.invoke(&mut inst, "grow", &[Value::I32(1)]).unwrap(), [Value::I32(1)]);
        e.invoke(&mut inst, "store", &[top, Value::I32(5)]).unwrap();
        assert_eq!(e.invoke(&mut inst, "load", &[Value::I32(2 * 65536 - 4)]).unwrap(), [Value::I32(5)]);
        assert_eq!(e.invoke(&mut inst, "grow", &[Value::I32(2)]).unwrap(), [Value::I32(-1)]);
    }
}
