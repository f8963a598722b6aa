mod common;

use common::*;
use detwasm::runtime::{InstanceConfig, TrapCode, Value};

#[test]
fn fib_matches_closed_loop_oracle() {
    for n in [0, 1, 2, 10, 20] {
        let r = interp_run(FIB, "fib", &[Value::I32(n)]).unwrap();
        assert_eq!(r, vec![Value::I32(fib_oracle(n as u32))]);
        let r = interp_run(FIB_ITER, "fib", &[Value::I32(n)]).unwrap();
        assert_eq!(r, vec![Value::I32(fib_oracle(n as u32))]);
    }
    assert_eq!(fib_oracle(25), 75025);
}

fn trap_of(wat: &str, name: &str, args: &[Value]) -> TrapCode {
    interp_run(wat, name, args).unwrap_err().code
}

#[test]
fn arithmetic_traps() {
    let m = r#"(module
      (func (export "div") (param i32 i32) (result i32) local.get 0 local.get 1 i32.div_s)
      (func (export "rem") (param i32 i32) (result i32) local.get 0 local.get 1 i32.rem_s)
      (func (export "trunc") (param f64) (result i32) local.get 0 i32.trunc_f64_s)
      (func (export "unreach") unreachable))"#;
    assert_eq!(trap_of(m, "div", &[Value::I32(1), Value::I32(0)]), TrapCode::IntegerDivideByZero);
    assert_eq!(trap_of(m, "div", &[Value::I32(i32::MIN), Value::I32(-1)]), TrapCode::IntegerOverflow);
    assert_eq!(interp_run(m, "rem", &[Value::I32(i32::MIN), Value::I32(-1)]).unwrap(), vec![Value::I32(0)]);
    assert_eq!(trap_of(m, "trunc", &[Value::f64(f64::NAN)]), TrapCode::InvalidConversionToInteger);
    assert_eq!(trap_of(m, "trunc", &[Value::f64(2147483648.0)]), TrapCode::InvalidConversionToInteger);
    assert_eq!(interp_run(m, "trunc", &[Value::f64(-2147483648.9)]).unwrap(), vec![Value::I32(i32::MIN)]);
    assert_eq!(trap_of(m, "unreach", &[]), TrapCode::Unreachable);
}

#[test]
fn memory_bounds_and_grow() {
    let m = r#"(module (memory 1 2)
      (func (export "load") (param i32) (result i32) local.get 0 i32.load offset=4)
      (func (export "grow") (param i32) (result i32) local.get 0 memory.grow)
      (func (export "store") (param i32 i64) local.get 0 local.get 1 i64.store))"#;
    let p = program(m);
    let mut inst = instance(&p, InstanceConfig::default());
    assert_eq!(interp_call(&mut inst, "load", &[Value::I32(65528)]).unwrap(), vec![Value::I32(0)]);
    let t = interp_call(&mut inst, "load", &[Value::I32(65529)]).unwrap_err();
    assert_eq!(t.code, TrapCode::MemoryAccessOutOfBounds);
    assert_eq!(t.detail, Some(65536));
    let t = interp_call(&mut inst, "load", &[Value::I32(-1)]).unwrap_err();
    assert_eq!(t.detail, Some(0xFFFF_FFFF + 4));
    assert_eq!(interp_call(&mut inst, "grow", &[Value::I32(1)]).unwrap(), vec![Value::I32(1)]);
    assert_eq!(interp_call(&mut inst, "grow", &[Value::I32(1)]).unwrap(), vec![Value::I32(-1)]);
    interp_call(&mut inst, "store", &[Value::I32(65536), Value::I64(0x0102)]).unwrap();
    assert_eq!(inst.memory().read(65536, 2), Some(&[2u8, 1][..]));
}

#[test]
fn recursion_depth_is_analytic() {
    let m = r#"(module (func $f (export "f") (param i64) (local i64 i64) i64.const 0 call $f))"#;
    let p = program(m);
    let w = p.func(0).frame_weight;
    for (depth, budget) in [(1024, 2_097_152), (16, 1_000_000), (1_000_000, 1000)] {
        let mut inst = instance(&p, InstanceConfig { max_depth: depth, weight_budget: budget, ..Default::default() });
        let t = interp_call(&mut inst, "f", &[Value::I64(0)]).unwrap_err();
        assert_eq!(t.code, TrapCode::WasmCallStackExceed);
        assert_eq!(t.detail, Some(depth.min(budget / w)));
    }
}

#[test]
fn gas_exhaustion_drains_limit() {
    let p = program(FIB);
    let mut inst = instance(&p, InstanceConfig { gas_limit: 10, ..Default::default() });
    let t = interp_call(&mut inst, "fib", &[Value::I32(30)]).unwrap_err();
    assert_eq!(t.code, TrapCode::GasExhausted);
    assert_eq!(t.gas_consumed, 10);
    assert_eq!(inst.gas().remaining, 0);
}

#[test]
fn host_calls_and_gas_additivity() {
    let m = r#"(module
      (import "env" "use_gas" (func $use (param i64)))
      (import "env" "echo_i64" (func $echo (param i64) (result i64)))
      (import "env" "fail" (func $fail))
      (func (export "burn") (param i64) local.get 0 call $use)
      (func (export "echo") (param i64) (result i64) local.get 0 call $echo)
      (func (export "fail") call $fail))"#;
    let p = program(m);
    let mut inst = instance(&p, InstanceConfig { gas_limit: 1000, ..Default::default() });
    interp_call(&mut inst, "burn", &[Value::I64(0)]).unwrap();
    let base = inst.gas().consumed();
    interp_call(&mut inst, "burn", &[Value::I64(10)]).unwrap();
    assert_eq!(inst.gas().consumed(), base + 10);
    let t = interp_call(&mut inst, "burn", &[Value::I64(5000)]).unwrap_err();
    assert_eq!((t.code, t.gas_consumed), (TrapCode::GasExhausted, 1000));
    assert_eq!(interp_call(&mut inst, "echo", &[Value::I64(-9)]).unwrap(), vec![Value::I64(-9)]);
    assert_eq!(interp_call(&mut inst, "fail", &[]).unwrap_err().code, TrapCode::HostError);
}

#[test]
fn indirect_calls() {
    let m = r#"(module
      (type $ii (func (param i32) (result i32)))
      (table 3 funcref)
      (elem (i32.const 0) $inc $nop)
      (func $inc (param i32) (result i32) local.get 0 i32.const 1 i32.add)
      (func $nop)
      (func (export "call") (param i32 i32) (result i32)
        local.get 0 local.get 1 call_indirect (type $ii)))"#;
    let r = |i: i32| interp_run(m, "call", &[Value::I32(41), Value::I32(i)]);
    assert_eq!(r(0).unwrap(), vec![Value::I32(42)]);
    assert_eq!(r(1).unwrap_err().code, TrapCode::IndirectCallTypeMismatch);
    assert_eq!(r(2).unwrap_err().code, TrapCode::UndefinedTableElement);
    assert_eq!(r(3).unwrap_err().code, TrapCode::UndefinedTableElement);
}

#[test]
fn nan_results_are_canonical() {
    let m = r#"(module (func (export "f") (param f32 f32) (result f32) local.get 0 local.get 1 f32.div))"#;
    let r = interp_run(m, "f", &[Value::f32(0.0), Value::f32(0.0)]).unwrap();
    assert_eq!(r, vec![Value::F32(detwasm::runtime::value::CANON_NAN_F32)]);
}

#[test]
fn checked_hooks_trap_on_overflow() {
    let m = r#"(module
      (import "env" "checked_i32_add" (func $add (param i32 i32) (result i32)))
      (func (export "f") (param i32 i32) (result i32) local.get 0 local.get 1 call $add))"#;
    assert_eq!(interp_run(m, "f", &[Value::I32(1), Value::I32(2)]).unwrap(), vec![Value::I32(3)]);
    assert_eq!(
        interp_run(m, "f", &[Value::I32(i32::MAX), Value::I32(1)]).unwrap_err().code,
        TrapCode::CheckedArithmeticOverflow
    );
}

#[test]
fn start_function_and_segments() {
    let m = r#"(module (memory 1) (global $g (mut i32) (i32.const 0))
      (data (i32.const 8) "\01\02")
      (func $s i32.const 5 global.set $g)
      (start $s)
      (func (export "g") (result i32) global.get $g))"#;
    assert_eq!(interp_run(m, "g", &[]).unwrap(), vec![Value::I32(5)]);
    let bad = r#"(module (memory 1) (data (i32.const 65530) "0123456789"))"#;
    let bytes = wat::parse_str(bad).unwrap();
    let p = std::sync::Arc::new(
        detwasm::dmir::Program::from_bytes(&bytes, &Default::default()).unwrap(),
    );
    let e = detwasm::runtime::Instance::new(p, Default::default(), Default::default()).err().unwrap();
    assert!(matches!(e, detwasm::runtime::InstantiationError::SegmentOutOfBounds { .. }));
}
