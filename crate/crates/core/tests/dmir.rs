mod common;

use std::sync::Arc;

use common::gen::Gen;
use common::*;
use detwasm::dmir::dump::dump_function;
use detwasm::dmir::verify::verify;
use detwasm::dmir::{lower_to_dmir, run_passes, CostModel, Inst, Pass, Program};
use detwasm::interp;
use detwasm::runtime::{InstanceConfig, Value};
use proptest::prelude::*;

#[test]
fn add_lowers_to_register_form() {
    let p = program(r#"(module (func (export "add") (param i64 i64) (result i64) local.get 0 local.get 1 i64.add))"#);
    let text = dump_function(&p.optimized(0));
    assert_eq!(
        text,
        "func f0 (i64, i64) -> (i64) weight=8\nbb0:\n  gas_charge 2\n  r3 = add.i64 r0, r1\n  r2 = copy.i64 r3\n  ret r2\n"
    );
}

#[test]
fn constant_expressions_fold_away() {
    let p = program(
        r#"(module (func (export "f") (result i32)
            i32.const 2 i32.const 3 i32.add i32.const 4 i32.mul
            i32.const 0 if (result i32) i32.const 1 else i32.const 2 end i32.add))"#,
    );
    let f = p.optimized(0);
    assert_eq!(f.blocks.len(), 1, "{}", dump_function(&f));
    assert!(matches!(f.blocks[0].insts.last(), Some(Inst::Const { val: Value::I32(22), .. })), "{}", dump_function(&f));
    // Folding never removes metering.
    let charged: u64 = f.blocks[0].insts.iter().map(|i| if let Inst::GasCharge(c) = i { *c } else { 0 }).sum();
    assert!(charged > 0);
}

#[test]
fn trapping_division_is_not_folded() {
    let p = program(r#"(module (func (export "f") (result i32) i32.const 1 i32.const 0 i32.div_u))"#);
    let f = p.optimized(0);
    assert!(f.blocks[0].insts.iter().any(|i| i.mnemonic() == "div_u"));
}

#[test]
fn metering_charges_block_cost_once_per_block() {
    let bytes = wat::parse_str(FIB).unwrap();
    let m = detwasm::frontend::load(&bytes, &Default::default()).unwrap();
    let raw = lower_to_dmir(&m, 0);
    let cost = CostModel::default();
    let p = Program::new(m, cost.clone());
    let metered = p.func(0);
    assert_eq!(raw.blocks.len(), metered.blocks.len());
    for (r, b) in raw.blocks.iter().zip(&metered.blocks) {
        let c = cost.block_cost(r);
        match b.insts.first() {
            Some(Inst::GasCharge(x)) => assert_eq!(*x, c),
            _ => assert_eq!(c, 0),
        }
    }
}

#[test]
fn empty_loop_still_pays_per_iteration() {
    let p = program(r#"(module (func (export "spin") (loop (br 0))))"#);
    let text = dump_function(p.func(0));
    assert!(text.contains("bb1:\n  gas_charge 1\n  jump bb1"), "{text}");
    let mut inst = instance(&p, InstanceConfig { gas_limit: 500, ..Default::default() });
    let t = interp_call(&mut inst, "spin", &[]).unwrap_err();
    assert_eq!((t.code, t.gas_consumed), (detwasm::runtime::TrapCode::GasExhausted, 500));
}

fn generated(seed: u64) -> Arc<Program> {
    program(&Gen::new(seed).module())
}

#[test]
fn generated_functions_verify_before_and_after_passes() {
    for seed in 0..60 {
        let p = generated(seed);
        for (i, f) in p.funcs().iter().enumerate() {
            verify(f).unwrap_or_else(|e| panic!("seed {seed} func {i}: {e}\n{}", dump_function(f)));
            let o = p.optimized(f.func_index);
            verify(&o).unwrap_or_else(|e| panic!("seed {seed} func {i} optimized: {e}\n{}", dump_function(&o)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passes_are_idempotent(seed in any::<u64>()) {
        let p = generated(seed);
        for f in p.funcs() {
            let mut once = f.clone();
            run_passes(&mut once, &Pass::ALL);
            let mut twice = once.clone();
            run_passes(&mut twice, &Pass::ALL);
            prop_assert_eq!(dump_function(&once), dump_function(&twice));
        }
    }

    #[test]
    fn passes_preserve_observable_behavior(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let text = g.module();
        let base = program(&text);
        let opt = Arc::new((*base).clone().with_passes(&Pass::ALL));
        for _ in 0..3 {
            let (a, b) = g.args();
            let args = [Value::I64(a), Value::I32(b)];
            let mut outcomes = Vec::new();
            for p in [&base, &opt] {
                let mut inst = instance(p, InstanceConfig { gas_limit: 50_000, ..Default::default() });
                inst.reset_gas();
                let r = interp::invoke_index(&mut inst, p.export("main").unwrap(), &args, None);
                outcomes.push((r.map_err(|t| t.code), inst.gas().consumed(), inst.memory_hash()));
            }
            prop_assert_eq!(&outcomes[0], &outcomes[1], "{}", text);
        }
    }
}

#[test]
fn generator_reaches_both_results_and_traps() {
    let mut counts = std::collections::BTreeMap::new();
    for seed in 0..200 {
        let mut g = Gen::new(seed);
        let p = program(&g.module());
        let (a, b) = g.args();
        let mut inst = instance(&p, InstanceConfig { gas_limit: 50_000, ..Default::default() });
        let r = interp::invoke_index(&mut inst, p.export("main").unwrap(), &[Value::I64(a), Value::I32(b)], None);
        *counts.entry(r.map(|_| "OK".to_string()).unwrap_or_else(|t| t.code.to_string())).or_insert(0) += 1;
    }
    println!("{counts:?}");
    assert!(counts.get("OK").copied().unwrap_or(0) >= 60, "{counts:?}");
    assert!(counts.len() >= 5, "{counts:?}");
}
