//! Structural checks for dMIR functions.

use crate::dmir::ir::{DmirFunction, Inst, Reg};
use crate::frontend::types::ValType;

/// Checks branch targets, reachability from the entry, positive gas charges,
/// operand types of the common instructions and def-before-use on every path.
pub fn verify(f: &DmirFunction) -> Result<(), String> {
    let nb = f.blocks.len() as u32;
    if nb == 0 {
        return Err("function has no blocks".into());
    }
    let nregs = f.reg_types.len() as u32;
    for (i, b) in f.blocks.iter().enumerate() {
        for s in b.term.successors() {
            if s >= nb {
                return Err(format!("bb{i}: branch to missing bb{s}"));
            }
        }
        for inst in &b.insts {
            if let Inst::GasCharge(0) = inst {
                return Err(format!("bb{i}: zero gas charge"));
            }
            for r in inst.uses().into_iter().chain(inst.def()) {
                if r >= nregs {
                    return Err(format!("bb{i}: unknown register r{r}"));
                }
            }
            check_types(f, inst).map_err(|e| format!("bb{i}: {e}"))?;
        }
        for r in b.term.uses() {
            if r >= nregs {
                return Err(format!("bb{i}: unknown register r{r}"));
            }
        }
    }
    if f.reverse_postorder().len() != f.blocks.len() {
        return Err("unreachable blocks present".into());
    }

    // Must-defined analysis: params are defined on entry.
    let n = nregs as usize;
    let full = vec![true; n];
    let mut defined_in: Vec<Vec<bool>> = vec![full.clone(); f.blocks.len()];
    let mut entry = vec![false; n];
    for p in 0..f.num_params() as usize {
        entry[p] = true;
    }
    defined_in[0] = entry.clone();
    let order = f.reverse_postorder();
    let preds = f.predecessors();
    loop {
        let mut changed = false;
        for &b in &order {
            let b = b as usize;
            let mut inn = if b == 0 { entry.clone() } else { full.clone() };
            for &p in &preds[b] {
                let out = block_out(f, p as usize, &defined_in[p as usize]);
                for (x, y) in inn.iter_mut().zip(out) {
                    *x &= y;
                }
            }
            if inn != defined_in[b] {
                defined_in[b] = inn;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for &b in &order {
        let mut d = defined_in[b as usize].clone();
        let block = &f.blocks[b as usize];
        for inst in &block.insts {
            for u in inst.uses() {
                if !d[u as usize] {
                    return Err(format!("bb{b}: r{u} used before definition"));
                }
            }
            if let Some(x) = inst.def() {
                d[x as usize] = true;
            }
        }
        for u in block.term.uses() {
            if !d[u as usize] {
                return Err(format!("bb{b}: r{u} used before definition in terminator"));
            }
        }
    }
    Ok(())
}

fn block_out(f: &DmirFunction, b: usize, inn: &[bool]) -> Vec<bool> {
    let mut d = inn.to_vec();
    for inst in &f.blocks[b].insts {
        if let Some(x) = inst.def() {
            d[x as usize] = true;
        }
    }
    d
}

fn check_types(f: &DmirFunction, inst: &Inst) -> Result<(), String> {
    let ty = |r: Reg| f.reg_type(r);
    let expect = |r: Reg, t: ValType| {
        if ty(r) == t {
            Ok(())
        } else {
            Err(format!("r{r} is {} but {} expected", ty(r), t))
        }
    };
    match inst {
        Inst::Const { dst, val } => expect(*dst, val.ty()),
        Inst::Copy { dst, src } | Inst::Canon { dst, src } => expect(*src, ty(*dst)),
        Inst::Unary { dst, op, a } => {
            expect(*a, op.params()[0])?;
            expect(*dst, op.result())
        }
        Inst::Binary { dst, op, a, b } => {
            expect(*a, op.params()[0])?;
            expect(*b, op.params()[1])?;
            expect(*dst, op.result())
        }
        Inst::Select { dst, cond, a, b } => {
            expect(*cond, ValType::I32)?;
            expect(*a, ty(*dst))?;
            expect(*b, ty(*dst))
        }
        Inst::Load { dst, op, base, .. } => {
            expect(*base, ValType::I32)?;
            expect(*dst, op.result())
        }
        Inst::Store { op, base, value, .. } => {
            expect(*base, ValType::I32)?;
            expect(*value, op.operand())
        }
        Inst::CheckedArith { dst, hook, a, b } => {
            let t = hook.int_type.storage();
            expect(*a, t)?;
            expect(*b, t)?;
            expect(*dst, t)
        }
        Inst::MemoryGrow { delta, .. } => expect(*delta, ValType::I32),
        Inst::CallIndirect { index, .. } => expect(*index, ValType::I32),
        _ => Ok(()),
    }
}
