//! Structured Wasm to dMIR CFG.

use crate::dmir::ir::{num_op_needs_canon, Block, BlockId, DmirFunction, Inst, Reg, Terminator};
use crate::frontend::ops::Operator;
use crate::frontend::types::{BlockType, ValType};
use crate::frontend::validate::ValidatedModule;
use crate::runtime::trap::TrapCode;
use crate::runtime::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Func,
    Block,
    Loop,
    If,
    Else,
}

#[derive(Debug, Clone)]
struct Frame {
    kind: Kind,
    /// Branch target: the loop header for loops, the end block otherwise.
    label: BlockId,
    end: BlockId,
    result: Option<Reg>,
    height: usize,
    /// For `if`: the block entered when the condition is false.
    else_block: Option<BlockId>,
    end_reachable: bool,
}

impl Frame {
    fn label_result(&self) -> Option<Reg> {
        match self.kind {
            Kind::Loop => None,
            _ => self.result,
        }
    }
}

struct Lowerer<'m> {
    m: &'m ValidatedModule,
    f: DmirFunction,
    cur: BlockId,
    reachable: bool,
    skip: u32,
    stack: Vec<Reg>,
    frames: Vec<Frame>,
}

/// Lower one defined function. The result is unmetered and unoptimized,
/// with blocks in reverse postorder and unreachable blocks removed.
pub fn lower_to_dmir(m: &ValidatedModule, func_index: u32) -> DmirFunction {
    assert!(!m.is_import(func_index), "cannot lower an imported function");
    let sig = m.func_type(func_index).clone();
    let info = m.info(func_index);
    let mut reg_types = sig.params.clone();
    reg_types.extend_from_slice(&info.locals);
    let num_locals = reg_types.len() as u32;
    let f = DmirFunction {
        func_index,
        sig,
        num_locals,
        reg_types,
        blocks: Vec::new(),
        frame_weight: info.frame_weight,
    };
    let mut l = Lowerer {
        m,
        f,
        cur: 0,
        reachable: true,
        skip: 0,
        stack: Vec::new(),
        frames: Vec::new(),
    };
    l.run(func_index);
    l.f.compact_blocks();
    l.f
}

impl<'m> Lowerer<'m> {
    fn new_reg(&mut self, ty: ValType) -> Reg {
        self.f.reg_types.push(ty);
        (self.f.reg_types.len() - 1) as Reg
    }

    fn new_block(&mut self) -> BlockId {
        self.f.blocks.push(Block {
            insts: Vec::new(),
            term: Terminator::Trap(TrapCode::Unreachable),
            explicit_branch: false,
        });
        (self.f.blocks.len() - 1) as BlockId
    }

    fn emit(&mut self, i: Inst) {
        self.f.blocks[self.cur as usize].insts.push(i);
    }

    fn terminate(&mut self, t: Terminator) {
        self.f.blocks[self.cur as usize].term = t;
        self.reachable = false;
    }

    fn switch_to(&mut self, b: BlockId) {
        self.cur = b;
        self.reachable = true;
    }

    fn pop(&mut self) -> Reg {
        self.stack.pop().expect("validated operand stack")
    }

    fn pop_n(&mut self, n: usize) -> Vec<Reg> {
        let at = self.stack.len() - n;
        self.stack.split_off(at)
    }

    fn top(&self) -> Reg {
        *self.stack.last().expect("validated operand stack")
    }

    fn block_result(&mut self, bt: BlockType) -> Option<Reg> {
        match bt {
            BlockType::Empty => None,
            BlockType::Value(t) => Some(self.new_reg(t)),
        }
    }

    fn push_frame(&mut self, kind: Kind, label: BlockId, end: BlockId, result: Option<Reg>, else_block: Option<BlockId>) {
        self.frames.push(Frame {
            kind,
            label,
            end,
            result,
            height: self.stack.len(),
            else_block,
            end_reachable: false,
        });
    }

    /// Before writing local `l`, stack entries aliasing it get their own copy.
    fn materialize(&mut self, l: Reg) {
        for i in 0..self.stack.len() {
            if self.stack[i] == l {
                let t = self.new_reg(self.f.reg_type(l));
                self.emit(Inst::Copy { dst: t, src: l });
                for e in self.stack[i..].iter_mut() {
                    if *e == l {
                        *e = t;
                    }
                }
                break;
            }
        }
    }

    fn frame_at(&mut self, depth: u32) -> &mut Frame {
        let n = self.frames.len();
        &mut self.frames[n - 1 - depth as usize]
    }

    /// Copies the branch value (if any) into the target's result register and
    /// returns the label block.
    fn branch_to(&mut self, depth: u32) -> BlockId {
        let top = self.stack.last().copied();
        let frame = self.frame_at(depth);
        if frame.kind != Kind::Loop {
            frame.end_reachable = true;
        }
        let label = frame.label;
        if let Some(r) = frame.label_result() {
            let src = top.expect("validated branch value");
            self.emit(Inst::Copy { dst: r, src });
        }
        label
    }

    fn run(&mut self, func_index: u32) {
        let entry = self.new_block();
        self.cur = entry;
        for l in self.f.num_params()..self.f.num_locals {
            let ty = self.f.reg_type(l);
            self.emit(Inst::Const { dst: l, val: Value::zero(ty) });
        }
        let ret = self.new_block();
        let result = self.f.sig.results.first().copied().map(|t| self.new_reg(t));
        self.push_frame(Kind::Func, ret, ret, result, None);

        let body = self.m.body(func_index);
        for instr in &body.instrs {
            if self.reachable {
                self.op(&instr.op);
            } else {
                self.skip_op(&instr.op);
            }
        }
        debug_assert!(self.frames.is_empty());
    }

    fn skip_op(&mut self, op: &Operator) {
        match op {
            Operator::Block(_) | Operator::Loop(_) | Operator::If(_) => self.skip += 1,
            Operator::End if self.skip > 0 => self.skip -= 1,
            Operator::Else if self.skip > 0 => {}
            Operator::End => self.end(),
            Operator::Else => self.else_(),
            _ => {}
        }
    }

    fn else_(&mut self) {
        let frame = self.frames.last().cloned().expect("if frame");
        if self.reachable {
            if let Some(r) = frame.result {
                let src = self.pop();
                self.emit(Inst::Copy { dst: r, src });
            }
            self.terminate(Terminator::Jump(frame.end));
            self.frames.last_mut().unwrap().end_reachable = true;
        }
        self.stack.truncate(frame.height);
        let else_b = frame.else_block.expect("else follows if");
        let top = self.frames.last_mut().unwrap();
        top.else_block = None;
        top.kind = Kind::Else;
        self.switch_to(else_b);
    }

    fn end(&mut self) {
        let mut frame = self.frames.pop().expect("control frame");
        if self.reachable {
            if let Some(r) = frame.result {
                let src = self.pop();
                self.emit(Inst::Copy { dst: r, src });
            }
            self.terminate(Terminator::Jump(frame.end));
            frame.end_reachable = true;
        }
        self.stack.truncate(frame.height);
        if let Some(else_b) = frame.else_block {
            // `if` without `else`: the false edge falls through to the end
            self.f.blocks[else_b as usize].term = Terminator::Jump(frame.end);
            frame.end_reachable = true;
        }
        if !frame.end_reachable {
            self.reachable = false;
            return;
        }
        self.switch_to(frame.end);
        if frame.kind == Kind::Func {
            self.terminate(Terminator::Return(frame.result));
        } else if let Some(r) = frame.result {
            self.stack.push(r);
        }
    }

    fn op(&mut self, op: &Operator) {
        match op {
            Operator::Unreachable => self.terminate(Terminator::Trap(TrapCode::Unreachable)),
            Operator::Nop => {}
            Operator::Block(bt) => {
                let end = self.new_block();
                let r = self.block_result(*bt);
                self.push_frame(Kind::Block, end, end, r, None);
            }
            Operator::Loop(bt) => {
                let header = self.new_block();
                let end = self.new_block();
                let r = self.block_result(*bt);
                self.terminate(Terminator::Jump(header));
                self.switch_to(header);
                self.push_frame(Kind::Loop, header, end, r, None);
            }
            Operator::If(bt) => {
                let cond = self.pop();
                let then_b = self.new_block();
                let else_b = self.new_block();
                let end = self.new_block();
                let r = self.block_result(*bt);
                self.terminate(Terminator::Branch { cond, then_to: then_b, else_to: else_b });
                self.switch_to(then_b);
                self.push_frame(Kind::If, end, end, r, Some(else_b));
            }
            Operator::Else => self.else_(),
            Operator::End => self.end(),
            Operator::Br(d) => {
                let label = self.branch_to(*d);
                self.f.blocks[self.cur as usize].explicit_branch = true;
                self.terminate(Terminator::Jump(label));
            }
            Operator::BrIf(d) => {
                let cond = self.pop();
                // Writing the target's result register on the fall-through
                // path is harmless: it is only read after the target's end.
                let label = self.branch_to(*d);
                let cont = self.new_block();
                self.f.blocks[self.cur as usize].explicit_branch = true;
                self.terminate(Terminator::Branch { cond, then_to: label, else_to: cont });
                self.switch_to(cont);
            }
            Operator::BrTable { targets, default } => {
                let index = self.pop();
                let has_value = self.frame_at(*default).label_result().is_some();
                let resolve = |this: &mut Self, d: u32, edges: &mut Vec<(u32, BlockId)>| -> BlockId {
                    if !has_value {
                        let frame = this.frame_at(d);
                        if frame.kind != Kind::Loop {
                            frame.end_reachable = true;
                        }
                        return frame.label;
                    }
                    if let Some(&(_, b)) = edges.iter().find(|(dd, _)| *dd == d) {
                        return b;
                    }
                    let here = this.cur;
                    let edge = this.new_block();
                    this.cur = edge;
                    let label = this.branch_to(d);
                    this.f.blocks[edge as usize].term = Terminator::Jump(label);
                    this.cur = here;
                    edges.push((d, edge));
                    edge
                };
                let mut edges = Vec::new();
                let ts: Vec<BlockId> = targets.iter().map(|&d| resolve(self, d, &mut edges)).collect();
                let def = resolve(self, *default, &mut edges);
                self.f.blocks[self.cur as usize].explicit_branch = true;
                self.terminate(Terminator::Switch { index, targets: ts, default: def });
            }
            Operator::Return => {
                let r = if self.f.sig.results.is_empty() { None } else { Some(self.top()) };
                self.terminate(Terminator::Return(r));
            }
            Operator::Call(func) => {
                let ty = self.m.func_type(*func).clone();
                if let Some(&hook) = self.m.checked_hooks.get(func) {
                    let b = self.pop();
                    let a = self.pop();
                    let dst = self.new_reg(hook.int_type.storage());
                    self.emit(Inst::CheckedArith { dst, hook, a, b });
                    self.stack.push(dst);
                    return;
                }
                let args = self.pop_n(ty.params.len());
                let dst = ty.results.first().map(|&t| self.new_reg(t));
                self.emit(Inst::Call { func: *func, args, dst });
                self.stack.extend(dst);
            }
            Operator::CallIndirect(ti) => {
                let ty = self.m.type_at(*ti).clone();
                let index = self.pop();
                let args = self.pop_n(ty.params.len());
                let dst = ty.results.first().map(|&t| self.new_reg(t));
                let sig_id = self.m.sig_ids[*ti as usize];
                self.emit(Inst::CallIndirect { type_index: *ti, sig_id, index, args, dst });
                self.stack.extend(dst);
            }
            Operator::Drop => {
                self.pop();
            }
            Operator::Select => {
                let cond = self.pop();
                let b = self.pop();
                let a = self.pop();
                let dst = self.new_reg(self.f.reg_type(a));
                self.emit(Inst::Select { dst, cond, a, b });
                self.stack.push(dst);
            }
            Operator::LocalGet(i) => self.stack.push(*i),
            Operator::LocalSet(i) => {
                let v = self.pop();
                self.materialize(*i);
                if v != *i {
                    self.emit(Inst::Copy { dst: *i, src: v });
                }
            }
            Operator::LocalTee(i) => {
                let v = self.pop();
                self.materialize(*i);
                if v != *i {
                    self.emit(Inst::Copy { dst: *i, src: v });
                }
                self.stack.push(*i);
            }
            Operator::GlobalGet(index) => {
                let dst = self.new_reg(self.m.globals[*index as usize].content);
                self.emit(Inst::GlobalGet { dst, index: *index });
                self.stack.push(dst);
            }
            Operator::GlobalSet(index) => {
                let src = self.pop();
                self.emit(Inst::GlobalSet { index: *index, src });
            }
            Operator::Load(lop, arg) => {
                let base = self.pop();
                let dst = self.new_reg(lop.result());
                self.emit(Inst::Load { dst, op: *lop, base, offset: arg.offset });
                self.stack.push(dst);
            }
            Operator::Store(sop, arg) => {
                let value = self.pop();
                let base = self.pop();
                self.emit(Inst::Store { op: *sop, base, value, offset: arg.offset });
            }
            Operator::MemorySize => {
                let dst = self.new_reg(ValType::I32);
                self.emit(Inst::MemorySize { dst });
                self.stack.push(dst);
            }
            Operator::MemoryGrow => {
                let delta = self.pop();
                let dst = self.new_reg(ValType::I32);
                self.emit(Inst::MemoryGrow { dst, delta });
                self.stack.push(dst);
            }
            Operator::I32Const(v) => self.konst(Value::I32(*v)),
            Operator::I64Const(v) => self.konst(Value::I64(*v)),
            Operator::F32Const(v) => self.konst(Value::F32(*v)),
            Operator::F64Const(v) => self.konst(Value::F64(*v)),
            Operator::Numeric(op) => {
                let dst = self.new_reg(op.result());
                if op.params().len() == 1 {
                    let a = self.pop();
                    self.emit(Inst::Unary { dst, op: *op, a });
                } else {
                    let b = self.pop();
                    let a = self.pop();
                    self.emit(Inst::Binary { dst, op: *op, a, b });
                }
                if num_op_needs_canon(*op) {
                    self.emit(Inst::Canon { dst, src: dst });
                }
                self.stack.push(dst);
            }
        }
    }

    fn konst(&mut self, val: Value) {
        let dst = self.new_reg(val.ty());
        self.emit(Inst::Const { dst, val });
        self.stack.push(dst);
    }
}
