//! Canonical text form of dMIR.

use std::fmt::Write;

use crate::dmir::ir::{DmirFunction, Inst, Reg, Terminator};

fn regs(rs: &[Reg]) -> String {
    rs.iter().map(|r| format!("r{r}")).collect::<Vec<_>>().join(", ")
}

pub fn dump_inst(f: &DmirFunction, inst: &Inst) -> String {
    let ty = |r: Reg| f.reg_type(r).name();
    let m = inst.mnemonic();
    match inst {
        Inst::Const { dst, val } => format!("r{dst} = const.{} {val}", ty(*dst)),
        Inst::Copy { dst, src } => format!("r{dst} = copy.{} r{src}", ty(*dst)),
        Inst::Unary { dst, a, .. } => format!("r{dst} = {m}.{} r{a}", ty(*dst)),
        Inst::Binary { dst, a, b, .. } => format!("r{dst} = {m}.{} r{a}, r{b}", ty(*dst)),
        Inst::Canon { dst, src } => format!("r{dst} = canon.{} r{src}", ty(*dst)),
        Inst::Select { dst, cond, a, b } => format!("r{dst} = select.{} r{cond}, r{a}, r{b}", ty(*dst)),
        Inst::Load { dst, base, offset, .. } => format!("r{dst} = {m}.{} r{base} +{offset}", ty(*dst)),
        Inst::Store { op, base, value, offset } => {
            format!("{m}.{} r{base} +{offset}, r{value}", op.operand().name())
        }
        Inst::MemorySize { dst } => format!("r{dst} = memory_size.i32"),
        Inst::MemoryGrow { dst, delta } => format!("r{dst} = memory_grow.i32 r{delta}"),
        Inst::GlobalGet { dst, index } => format!("r{dst} = global_get.{} g{index}", ty(*dst)),
        Inst::GlobalSet { index, src } => format!("global_set.{} g{index}, r{src}", ty(*src)),
        Inst::Call { func, args, dst } => match dst {
            Some(d) => format!("r{d} = call.{} f{func}({})", ty(*d), regs(args)),
            None => format!("call f{func}({})", regs(args)),
        },
        Inst::CallIndirect { type_index, index, args, dst, .. } => match dst {
            Some(d) => format!("r{d} = call_indirect.{} t{type_index} [r{index}]({})", ty(*d), regs(args)),
            None => format!("call_indirect t{type_index} [r{index}]({})", regs(args)),
        },
        Inst::CheckedArith { dst, hook, a, b } => {
            format!("r{dst} = {m}.{} r{a}, r{b}", hook.int_type.name())
        }
        Inst::GasCharge(c) => format!("gas_charge {c}"),
    }
}

pub fn dump_terminator(t: &Terminator) -> String {
    match t {
        Terminator::Jump(b) => format!("jump bb{b}"),
        Terminator::Branch { cond, then_to, else_to } => format!("br r{cond}, bb{then_to}, bb{else_to}"),
        Terminator::Switch { index, targets, default } => {
            let ts: Vec<String> = targets.iter().map(|b| format!("bb{b}")).collect();
            format!("switch r{index}, [{}], bb{default}", ts.join(", "))
        }
        Terminator::Return(Some(r)) => format!("ret r{r}"),
        Terminator::Return(None) => "ret".to_string(),
        Terminator::Trap(code) => format!("trap {code}"),
    }
}

pub fn dump_function(f: &DmirFunction) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "func f{} {} weight={}", f.func_index, f.sig, f.frame_weight);
    for (i, b) in f.blocks.iter().enumerate() {
        let _ = writeln!(s, "bb{i}:");
        for inst in &b.insts {
            let _ = writeln!(s, "  {}", dump_inst(f, inst));
        }
        let _ = writeln!(s, "  {}", dump_terminator(&b.term));
    }
    s
}
