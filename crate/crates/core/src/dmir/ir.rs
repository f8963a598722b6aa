//! dMIR: a CFG of typed instructions over virtual registers.
//!
//! Registers are mutable (register form, not SSA). Registers `0..num_locals`
//! are the Wasm locals, parameters first.

use crate::dmir::hooks::HookKind;
use crate::frontend::ops::{LoadOp, NumOp, StoreOp};
use crate::frontend::types::{FuncType, ValType};
use crate::runtime::trap::TrapCode;
use crate::runtime::value::Value;

pub type Reg = u32;
pub type BlockId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Inst {
    Const { dst: Reg, val: Value },
    Copy { dst: Reg, src: Reg },
    Unary { dst: Reg, op: NumOp, a: Reg },
    Binary { dst: Reg, op: NumOp, a: Reg, b: Reg },
    /// Replace any NaN in `src` by the canonical quiet NaN of its width.
    Canon { dst: Reg, src: Reg },
    Select { dst: Reg, cond: Reg, a: Reg, b: Reg },
    Load { dst: Reg, op: LoadOp, base: Reg, offset: u32 },
    Store { op: StoreOp, base: Reg, value: Reg, offset: u32 },
    MemorySize { dst: Reg },
    MemoryGrow { dst: Reg, delta: Reg },
    GlobalGet { dst: Reg, index: u32 },
    GlobalSet { index: u32, src: Reg },
    Call { func: u32, args: Vec<Reg>, dst: Option<Reg> },
    CallIndirect { type_index: u32, sig_id: u32, index: Reg, args: Vec<Reg>, dst: Option<Reg> },
    CheckedArith { dst: Reg, hook: HookKind, a: Reg, b: Reg },
    GasCharge(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Terminator {
    Jump(BlockId),
    Branch { cond: Reg, then_to: BlockId, else_to: BlockId },
    /// Out-of-range index takes `default`.
    Switch { index: Reg, targets: Vec<BlockId>, default: BlockId },
    Return(Option<Reg>),
    Trap(TrapCode),
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Jump(b) => vec![*b],
            Terminator::Branch { then_to, else_to, .. } => vec![*then_to, *else_to],
            Terminator::Switch { targets, default, .. } => {
                let mut v = targets.clone();
                v.push(*default);
                v
            }
            Terminator::Return(_) | Terminator::Trap(_) => vec![],
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut BlockId> {
        match self {
            Terminator::Jump(b) => vec![b],
            Terminator::Branch { then_to, else_to, .. } => vec![then_to, else_to],
            Terminator::Switch { targets, default, .. } => {
                let mut v: Vec<&mut BlockId> = targets.iter_mut().collect();
                v.push(default);
                v
            }
            Terminator::Return(_) | Terminator::Trap(_) => vec![],
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Terminator::Branch { cond, .. } => vec![*cond],
            Terminator::Switch { index, .. } => vec![*index],
            Terminator::Return(Some(r)) => vec![*r],
            _ => vec![],
        }
    }
}

/// True for numeric operators that may trap (division and float-to-int truncation).
pub fn num_op_traps(op: NumOp) -> bool {
    use NumOp::*;
    matches!(
        op,
        I32DivS
            | I32DivU
            | I32RemS
            | I32RemU
            | I64DivS
            | I64DivU
            | I64RemS
            | I64RemU
            | I32TruncF32S
            | I32TruncF32U
            | I32TruncF64S
            | I32TruncF64U
            | I64TruncF32S
            | I64TruncF32U
            | I64TruncF64S
            | I64TruncF64U
    )
}

/// Float-producing operators whose result is canonicalized.
pub fn num_op_needs_canon(op: NumOp) -> bool {
    op.result().is_float() && !matches!(op, NumOp::F32ReinterpretI32 | NumOp::F64ReinterpretI64)
}

impl Inst {
    pub fn def(&self) -> Option<Reg> {
        match self {
            Inst::Const { dst, .. }
            | Inst::Copy { dst, .. }
            | Inst::Unary { dst, .. }
            | Inst::Binary { dst, .. }
            | Inst::Canon { dst, .. }
            | Inst::Select { dst, .. }
            | Inst::Load { dst, .. }
            | Inst::MemorySize { dst }
            | Inst::MemoryGrow { dst, .. }
            | Inst::GlobalGet { dst, .. }
            | Inst::CheckedArith { dst, .. } => Some(*dst),
            Inst::Call { dst, .. } | Inst::CallIndirect { dst, .. } => *dst,
            Inst::Store { .. } | Inst::GlobalSet { .. } | Inst::GasCharge(_) => None,
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Inst::Const { .. } | Inst::MemorySize { .. } | Inst::GlobalGet { .. } | Inst::GasCharge(_) => vec![],
            Inst::Copy { src, .. } | Inst::Canon { src, .. } | Inst::GlobalSet { src, .. } => vec![*src],
            Inst::Unary { a, .. } => vec![*a],
            Inst::Binary { a, b, .. } | Inst::CheckedArith { a, b, .. } => vec![*a, *b],
            Inst::Select { cond, a, b, .. } => vec![*a, *b, *cond],
            Inst::Load { base, .. } => vec![*base],
            Inst::Store { base, value, .. } => vec![*base, *value],
            Inst::MemoryGrow { delta, .. } => vec![*delta],
            Inst::Call { args, .. } => args.clone(),
            Inst::CallIndirect { index, args, .. } => {
                let mut v = args.clone();
                v.push(*index);
                v
            }
        }
    }

    pub fn uses_mut(&mut self) -> Vec<&mut Reg> {
        match self {
            Inst::Const { .. } | Inst::MemorySize { .. } | Inst::GlobalGet { .. } | Inst::GasCharge(_) => vec![],
            Inst::Copy { src, .. } | Inst::Canon { src, .. } | Inst::GlobalSet { src, .. } => vec![src],
            Inst::Unary { a, .. } => vec![a],
            Inst::Binary { a, b, .. } | Inst::CheckedArith { a, b, .. } => vec![a, b],
            Inst::Select { cond, a, b, .. } => vec![a, b, cond],
            Inst::Load { base, .. } => vec![base],
            Inst::Store { base, value, .. } => vec![base, value],
            Inst::MemoryGrow { delta, .. } => vec![delta],
            Inst::Call { args, .. } => args.iter_mut().collect(),
            Inst::CallIndirect { index, args, .. } => {
                let mut v: Vec<&mut Reg> = args.iter_mut().collect();
                v.push(index);
                v
            }
        }
    }

    /// No side effects and cannot trap: removable when its result is dead.
    pub fn is_pure(&self) -> bool {
        match self {
            Inst::Const { .. }
            | Inst::Copy { .. }
            | Inst::Canon { .. }
            | Inst::Select { .. }
            | Inst::MemorySize { .. }
            | Inst::GlobalGet { .. } => true,
            Inst::Unary { op, .. } | Inst::Binary { op, .. } => !num_op_traps(*op),
            _ => false,
        }
    }

    pub fn is_call(&self) -> bool {
        matches!(self, Inst::Call { .. } | Inst::CallIndirect { .. })
    }

    /// Mnemonic used by the textual dump and as the cost-table key.
    pub fn mnemonic(&self) -> String {
        match self {
            Inst::Const { .. } => "const".into(),
            Inst::Copy { .. } => "copy".into(),
            Inst::Unary { op, .. } | Inst::Binary { op, .. } => swap_name(op.name()),
            Inst::Canon { .. } => "canon".into(),
            Inst::Select { .. } => "select".into(),
            Inst::Load { op, .. } => swap_name(op.name()),
            Inst::Store { op, .. } => swap_name(op.name()),
            Inst::MemorySize { .. } => "memory_size".into(),
            Inst::MemoryGrow { .. } => "memory_grow".into(),
            Inst::GlobalGet { .. } => "global_get".into(),
            Inst::GlobalSet { .. } => "global_set".into(),
            Inst::Call { .. } => "call".into(),
            Inst::CallIndirect { .. } => "call_indirect".into(),
            Inst::CheckedArith { hook, .. } => format!("checked_{}", hook.op.name()),
            Inst::GasCharge(_) => "gas_charge".into(),
        }
    }
}

/// `i64.add` -> `add`, keeping the type for the suffix.
fn swap_name(wasm: &str) -> String {
    match wasm.split_once('.') {
        Some((_, op)) => op.to_string(),
        None => wasm.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Block {
    pub insts: Vec<Inst>,
    pub term: Terminator,
    /// The terminator is an explicit `br`, `br_if` or `br_table`, which is
    /// metered like any other opcode. Structural jumps are free.
    pub explicit_branch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DmirFunction {
    pub func_index: u32,
    pub sig: FuncType,
    /// Parameters plus declared locals.
    pub num_locals: u32,
    pub reg_types: Vec<ValType>,
    pub blocks: Vec<Block>,
    /// Static frame weight used by the call-stack check.
    pub frame_weight: u64,
}

impl DmirFunction {
    pub fn num_params(&self) -> u32 {
        self.sig.params.len() as u32
    }

    pub fn reg_type(&self, r: Reg) -> ValType {
        self.reg_types[r as usize]
    }

    pub fn inst_count(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len() + 1).sum()
    }

    pub fn has_gas_charges(&self) -> bool {
        self.blocks.iter().any(|b| b.insts.iter().any(|i| matches!(i, Inst::GasCharge(_))))
    }

    /// Predecessor lists, one per block.
    pub fn predecessors(&self) -> Vec<Vec<BlockId>> {
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            for s in b.term.successors() {
                if !preds[s as usize].contains(&(i as BlockId)) {
                    preds[s as usize].push(i as BlockId);
                }
            }
        }
        preds
    }

    /// Reverse postorder of blocks reachable from the entry.
    pub fn reverse_postorder(&self) -> Vec<BlockId> {
        let n = self.blocks.len();
        let mut seen = vec![false; n];
        let mut post = Vec::with_capacity(n);
        // iterative DFS: (block, next successor index)
        let mut stack: Vec<(BlockId, usize)> = vec![(0, 0)];
        seen[0] = true;
        while let Some(&mut (b, ref mut i)) = stack.last_mut() {
            let succs = self.blocks[b as usize].term.successors();
            if *i < succs.len() {
                let s = succs[*i];
                *i += 1;
                if !seen[s as usize] {
                    seen[s as usize] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(b);
                stack.pop();
            }
        }
        post.reverse();
        post
    }

    /// Drops blocks unreachable from the entry and renumbers the rest in
    /// reverse postorder. Returns true if anything changed.
    pub fn compact_blocks(&mut self) -> bool {
        let order = self.reverse_postorder();
        let identity = order.len() == self.blocks.len() && order.iter().enumerate().all(|(i, &b)| i as u32 == b);
        if identity {
            return false;
        }
        let mut remap = vec![u32::MAX; self.blocks.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut old_blocks: Vec<Option<Block>> = std::mem::take(&mut self.blocks).into_iter().map(Some).collect();
        for &old in &order {
            let mut b = old_blocks[old as usize].take().unwrap();
            for s in b.term.successors_mut() {
                *s = remap[*s as usize];
            }
            self.blocks.push(b);
        }
        true
    }
}
