//! Platform-independent dMIR passes: constant folding/propagation, dead code
//! elimination and straight-line block merging. `gas_charge` is treated as
//! an opaque side effect that stays at its program point.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dmir::eval::{canon, eval_binary, eval_unary};
use crate::dmir::ir::{DmirFunction, Inst, Reg, Terminator};
use crate::runtime::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pass {
    ConstFold,
    Dce,
    MergeBlocks,
}

impl Pass {
    pub const ALL: [Pass; 3] = [Pass::ConstFold, Pass::Dce, Pass::MergeBlocks];
}

/// Apply `passes` repeatedly until none of them changes the function.
pub fn run_passes(f: &mut DmirFunction, passes: &[Pass]) {
    loop {
        let mut changed = false;
        for p in passes {
            changed |= match p {
                Pass::ConstFold => const_fold(f),
                Pass::Dce => dce(f),
                Pass::MergeBlocks => merge_blocks(f),
            };
        }
        if !changed {
            break;
        }
    }
}

/// Block-local constant propagation and folding. Operations that would trap
/// on their constant inputs are left alone.
pub fn const_fold(f: &mut DmirFunction) -> bool {
    let mut changed = false;
    let reg_types = f.reg_types.clone();
    let ty = |r: Reg| reg_types[r as usize];
    for block in &mut f.blocks {
        let mut known: HashMap<Reg, Value> = HashMap::new();
        for inst in &mut block.insts {
            let replacement = match inst {
                Inst::Const { dst, val } => {
                    known.insert(*dst, *val);
                    None
                }
                Inst::Copy { dst, src } => known.get(src).map(|v| Inst::Const { dst: *dst, val: *v }),
                Inst::Unary { dst, op, a } => known.get(a).and_then(|va| {
                    eval_unary(*op, va.to_bits())
                        .ok()
                        .map(|bits| Inst::Const { dst: *dst, val: Value::from_bits(ty(*dst), bits) })
                }),
                Inst::Binary { dst, op, a, b } => match (known.get(a), known.get(b)) {
                    (Some(va), Some(vb)) => eval_binary(*op, va.to_bits(), vb.to_bits())
                        .ok()
                        .map(|bits| Inst::Const { dst: *dst, val: Value::from_bits(ty(*dst), bits) }),
                    _ => None,
                },
                Inst::Canon { dst, src } => known.get(src).map(|v| Inst::Const {
                    dst: *dst,
                    val: Value::from_bits(ty(*dst), canon(ty(*dst), v.to_bits())),
                }),
                Inst::Select { dst, cond, a, b } => known.get(cond).map(|c| {
                    let src = if c.to_bits() as u32 != 0 { *a } else { *b };
                    match known.get(&src) {
                        Some(v) => Inst::Const { dst: *dst, val: *v },
                        None => Inst::Copy { dst: *dst, src },
                    }
                }),
                _ => None,
            };
            if let Some(new) = replacement {
                if *inst != new {
                    *inst = new;
                    changed = true;
                }
            }
            match inst {
                Inst::Const { dst, val } => {
                    known.insert(*dst, *val);
                }
                other => {
                    if let Some(d) = other.def() {
                        known.remove(&d);
                    }
                }
            }
        }
        let new_term = match &block.term {
            Terminator::Branch { cond, then_to, else_to } => known
                .get(cond)
                .map(|c| Terminator::Jump(if c.to_bits() as u32 != 0 { *then_to } else { *else_to })),
            Terminator::Switch { index, targets, default } => known.get(index).map(|i| {
                let i = i.to_bits() as u32 as usize;
                Terminator::Jump(*targets.get(i).unwrap_or(default))
            }),
            _ => None,
        };
        if let Some(t) = new_term {
            block.term = t;
            changed = true;
        }
    }
    changed
}

#[derive(Clone, PartialEq, Eq)]
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> BitSet {
        BitSet(vec![0; n.div_ceil(64)])
    }
    fn get(&self, i: Reg) -> bool {
        self.0[i as usize / 64] >> (i % 64) & 1 == 1
    }
    fn set(&mut self, i: Reg) {
        self.0[i as usize / 64] |= 1 << (i % 64);
    }
    fn clear(&mut self, i: Reg) {
        self.0[i as usize / 64] &= !(1 << (i % 64));
    }
    fn union_with(&mut self, o: &BitSet) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a |= *b;
        }
    }
}

/// Live-out register sets per block.
fn liveness(f: &DmirFunction) -> Vec<BitSet> {
    let n = f.reg_types.len();
    let nb = f.blocks.len();
    let mut live_in = vec![BitSet::new(n); nb];
    let mut live_out = vec![BitSet::new(n); nb];
    let order: Vec<usize> = f.reverse_postorder().into_iter().rev().map(|b| b as usize).collect();
    loop {
        let mut changed = false;
        for &b in &order {
            let block = &f.blocks[b];
            let mut out = BitSet::new(n);
            for s in block.term.successors() {
                out.union_with(&live_in[s as usize]);
            }
            let mut live = out.clone();
            for r in block.term.uses() {
                live.set(r);
            }
            for inst in block.insts.iter().rev() {
                if let Some(d) = inst.def() {
                    live.clear(d);
                }
                for u in inst.uses() {
                    live.set(u);
                }
            }
            if live != live_in[b] {
                live_in[b] = live;
                changed = true;
            }
            live_out[b] = out;
        }
        if !changed {
            return live_out;
        }
    }
}

/// Removes unreachable blocks, self-copies and pure instructions whose result is dead.
pub fn dce(f: &mut DmirFunction) -> bool {
    let mut changed = f.compact_blocks();
    loop {
        let live_out = liveness(f);
        let mut removed = false;
        for (b, block) in f.blocks.iter_mut().enumerate() {
            let mut live = live_out[b].clone();
            for r in block.term.uses() {
                live.set(r);
            }
            let mut keep = vec![true; block.insts.len()];
            for (i, inst) in block.insts.iter().enumerate().rev() {
                let self_copy = matches!(inst, Inst::Copy { dst, src } if dst == src);
                let dead = inst.def().is_some_and(|d| !live.get(d)) && inst.is_pure();
                if self_copy || dead {
                    keep[i] = false;
                    continue;
                }
                if let Some(d) = inst.def() {
                    live.clear(d);
                }
                for u in inst.uses() {
                    live.set(u);
                }
            }
            if keep.iter().any(|k| !k) {
                let mut it = keep.iter();
                block.insts.retain(|_| *it.next().unwrap());
                removed = true;
            }
        }
        if !removed {
            break;
        }
        changed = true;
    }
    changed
}

/// Merges a block into its unique predecessor when that predecessor jumps
/// to it unconditionally, and coalesces directly adjacent gas charges.
pub fn merge_blocks(f: &mut DmirFunction) -> bool {
    let mut changed = false;
    let mut preds = f.predecessors();
    for a in 0..f.blocks.len() {
        loop {
            let Terminator::Jump(b) = f.blocks[a].term else { break };
            let b = b as usize;
            if b == a || b == 0 || preds[b].len() != 1 {
                break;
            }
            let tail = std::mem::replace(
                &mut f.blocks[b],
                crate::dmir::ir::Block { insts: Vec::new(), term: Terminator::Return(None), explicit_branch: false },
            );
            for s in tail.term.successors() {
                for p in preds[s as usize].iter_mut() {
                    if *p as usize == b {
                        *p = a as u32;
                    }
                }
                preds[s as usize].dedup();
            }
            preds[b].clear();
            f.blocks[a].insts.extend(tail.insts);
            f.blocks[a].term = tail.term;
            f.blocks[a].explicit_branch = tail.explicit_branch;
            changed = true;
        }
    }
    if changed {
        f.compact_blocks();
    }
    for block in &mut f.blocks {
        let mut out: Vec<Inst> = Vec::with_capacity(block.insts.len());
        for inst in block.insts.drain(..) {
            if let (Inst::GasCharge(c), Some(Inst::GasCharge(prev))) = (&inst, out.last_mut()) {
                *prev += *c;
                changed = true;
                continue;
            }
            out.push(inst);
        }
        block.insts = out;
    }
    changed
}
