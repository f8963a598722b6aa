//! dMIR to Cranelift IR.
//!
//! Guest functions use the tail calling convention with signature
//! `(vmctx, params...) -> result`. Remaining gas lives in the pinned
//! register for as long as guest code runs.

use cranelift_codegen::ir::condcodes::{FloatCC, IntCC};
use cranelift_codegen::ir::{
    types, AbiParam, Block, BlockArg, Function, InstBuilder, MemFlagsData, SigRef, Signature, StackSlotData,
    StackSlotKind, Type, UserFuncName, Value,
};
use cranelift_codegen::isa::{CallConv, TargetFrontendConfig};
use cranelift_frontend::{FunctionBuilder, FunctionBuilderContext, Switch, Variable};

use crate::backend::rt::{self, NO_DETAIL, TRAP_COMPILE};
use crate::dmir::hooks::{HookInt, HookKind, HookOp};
use crate::dmir::ir::{DmirFunction, Inst, Reg, Terminator};
use crate::frontend::ops::{LoadOp, NumOp, StoreOp};
use crate::frontend::types::{FuncType, ValType};
use crate::frontend::ValidatedModule;
use crate::runtime::memory::MemoryMode;
use crate::runtime::trap::TrapCode;
use crate::runtime::vmctx::off;

pub(crate) fn clif_type(t: ValType) -> Type {
    match t {
        ValType::I32 => types::I32,
        ValType::I64 => types::I64,
        ValType::F32 => types::F32,
        ValType::F64 => types::F64,
    }
}

/// Signature of guest code for `ty`.
pub(crate) fn guest_signature(ty: &FuncType) -> Signature {
    let mut sig = Signature::new(CallConv::Tail);
    sig.params.push(AbiParam::new(types::I64));
    sig.params.extend(ty.params.iter().map(|t| AbiParam::new(clif_type(*t))));
    sig.returns.extend(ty.results.iter().map(|t| AbiParam::new(clif_type(*t))));
    sig
}

fn native_signature(params: &[Type], ret: Option<Type>) -> Signature {
    let mut sig = Signature::new(CallConv::SystemV);
    sig.params.extend(params.iter().map(|t| AbiParam::new(*t)));
    sig.returns.extend(ret.map(AbiParam::new));
    sig
}

const VM: MemFlagsData = MemFlagsData::trusted();

/// Shared state for building one function: the cold trap block and the
/// vmctx value.
pub(crate) struct Common {
    pub vmctx: Value,
    trap_block: Option<Block>,
    trap_sig: Option<SigRef>,
}

impl Common {
    pub fn new(vmctx: Value) -> Common {
        Common { vmctx, trap_block: None, trap_sig: None }
    }

    fn trap_block(&mut self, b: &mut FunctionBuilder) -> Block {
        if let Some(t) = self.trap_block {
            return t;
        }
        let t = b.create_block();
        b.append_block_param(t, types::I64);
        b.append_block_param(t, types::I64);
        b.set_cold_block(t);
        self.trap_block = Some(t);
        t
    }

    /// Branch to the trap path with `code` when `cond` holds.
    pub fn trap_if(&mut self, b: &mut FunctionBuilder, cond: Value, code: u64, detail: Option<Value>) {
        let t = self.trap_block(b);
        let cont = b.create_block();
        let code = b.ins().iconst(types::I64, code as i64);
        let detail = detail.unwrap_or_else(|| b.ins().iconst(types::I64, NO_DETAIL as i64));
        b.ins().brif(cond, t, &[BlockArg::from(code), BlockArg::from(detail)], cont, &[]);
        b.switch_to_block(cont);
    }

    pub fn trap(&mut self, b: &mut FunctionBuilder, code: u64, detail: Option<Value>) {
        let t = self.trap_block(b);
        let code = b.ins().iconst(types::I64, code as i64);
        let detail = detail.unwrap_or_else(|| b.ins().iconst(types::I64, NO_DETAIL as i64));
        b.ins().jump(t, &[BlockArg::from(code), BlockArg::from(detail)]);
    }

    /// Emit the trap block body; call once everything else is built.
    pub fn finish(&mut self, b: &mut FunctionBuilder) {
        let Some(t) = self.trap_block else { return };
        b.switch_to_block(t);
        let code = b.block_params(t)[0];
        let detail = b.block_params(t)[1];
        let gas = b.ins().get_pinned_reg(types::I64);
        let sig = *self
            .trap_sig
            .get_or_insert_with(|| b.import_signature(native_signature(&[types::I64; 4], None)));
        let f = b.ins().iconst(types::I64, rt::trap_fn() as i64);
        b.ins().call_indirect(sig, f, &[self.vmctx, code, detail, gas]);
        b.ins().trap(cranelift_codegen::ir::TrapCode::unwrap_user(1));
    }
}

pub(crate) struct Translator<'a> {
    f: &'a DmirFunction,
    module: &'a ValidatedModule,
    mode: MemoryMode,
    vars: Vec<Variable>,
    common: Common,
    mem_base: Value,
    slots: Value,
    globals: Value,
    guest_sigs: Vec<Option<SigRef>>,
    grow_sig: Option<SigRef>,
}

pub(crate) fn translate(
    f: &DmirFunction,
    module: &ValidatedModule,
    mode: MemoryMode,
    fc: TargetFrontendConfig,
) -> Function {
    let mut func = Function::with_name_signature(UserFuncName::user(0, f.func_index), guest_signature(&f.sig));
    let mut ctx = FunctionBuilderContext::new();
    let mut b = FunctionBuilder::new(&mut func, &mut ctx);

    let entry = b.create_block();
    b.append_block_params_for_function_params(entry);
    b.switch_to_block(entry);
    let params: Vec<Value> = b.block_params(entry).to_vec();
    let vmctx = params[0];
    let vars: Vec<Variable> = f.reg_types.iter().map(|t| b.declare_var(clif_type(*t))).collect();
    for (i, v) in params[1..].iter().enumerate() {
        b.def_var(vars[i], *v);
    }
    let mem_base = b.ins().load(types::I64, VM, vmctx, off::MEM_BASE);
    let slots = b.ins().load(types::I64, VM, vmctx, off::SLOTS);
    let globals = b.ins().load(types::I64, VM, vmctx, off::GLOBALS);
    let mut t = Translator {
        f,
        module,
        mode,
        vars,
        common: Common::new(vmctx),
        mem_base,
        slots,
        globals,
        guest_sigs: vec![None; module.ast.types.len()],
        grow_sig: None,
    };
    t.stack_check(&mut b);

    let blocks: Vec<Block> = f.blocks.iter().map(|_| b.create_block()).collect();
    b.ins().jump(blocks[0], &[]);
    for (i, block) in f.blocks.iter().enumerate() {
        b.switch_to_block(blocks[i]);
        for inst in &block.insts {
            t.inst(&mut b, inst);
        }
        t.terminator(&mut b, &block.term, &blocks);
    }
    t.common.finish(&mut b);
    b.seal_all_blocks();
    b.finalize(fc);
    func
}

impl Translator<'_> {
    fn get(&self, b: &mut FunctionBuilder, r: Reg) -> Value {
        b.use_var(self.vars[r as usize])
    }

    fn set(&self, b: &mut FunctionBuilder, r: Reg, v: Value) {
        b.def_var(self.vars[r as usize], v);
    }

    fn vm(&self) -> Value {
        self.common.vmctx
    }

    fn stack_check(&mut self, b: &mut FunctionBuilder) {
        let vm = self.vm();
        let depth = b.ins().load(types::I64, VM, vm, off::DEPTH);
        let max = b.ins().load(types::I64, VM, vm, off::MAX_DEPTH);
        let over = b.ins().icmp(IntCC::UnsignedGreaterThanOrEqual, depth, max);
        self.common.trap_if(b, over, TrapCode::WasmCallStackExceed as u64, Some(depth));
        let used = b.ins().load(types::I64, VM, vm, off::WEIGHT_USED);
        let used = b.ins().iadd_imm_s(used, self.f.frame_weight as i64);
        let budget = b.ins().load(types::I64, VM, vm, off::WEIGHT_BUDGET);
        let over = b.ins().icmp(IntCC::UnsignedGreaterThan, used, budget);
        self.common.trap_if(b, over, TrapCode::WasmCallStackExceed as u64, Some(depth));
        let d1 = b.ins().iadd_imm_s(depth, 1);
        b.ins().store(VM, d1, vm, off::DEPTH);
        b.ins().store(VM, used, vm, off::WEIGHT_USED);
    }

    fn pop_frame(&mut self, b: &mut FunctionBuilder) {
        let vm = self.vm();
        let depth = b.ins().load(types::I64, VM, vm, off::DEPTH);
        let depth = b.ins().iadd_imm_s(depth, -1);
        b.ins().store(VM, depth, vm, off::DEPTH);
        let used = b.ins().load(types::I64, VM, vm, off::WEIGHT_USED);
        let used = b.ins().iadd_imm_s(used, -(self.f.frame_weight as i64));
        b.ins().store(VM, used, vm, off::WEIGHT_USED);
    }

    /// Native address of a `width`-byte access, with the bounds check in
    /// software-check mode.
    fn address(&mut self, b: &mut FunctionBuilder, base: Reg, offset: u32, width: u32) -> (Value, MemFlagsData) {
        let base = self.get(b, base);
        let base = b.ins().uextend(types::I64, base);
        let ea = b.ins().iadd_imm_s(base, offset as i64);
        let flags = match self.mode {
            MemoryMode::SoftwareCheck => {
                let end = b.ins().iadd_imm_s(ea, width as i64);
                let size = b.ins().load(types::I64, VM, self.vm(), off::MEM_SIZE);
                let oob = b.ins().icmp(IntCC::UnsignedGreaterThan, end, size);
                self.common.trap_if(b, oob, TrapCode::MemoryAccessOutOfBounds as u64, Some(ea));
                MemFlagsData::new().with_notrap()
            }
            MemoryMode::GuardPage => MemFlagsData::new(),
        };
        (b.ins().iadd(self.mem_base, ea), flags)
    }

    fn guest_sig(&mut self, b: &mut FunctionBuilder, type_index: u32) -> SigRef {
        if let Some(s) = self.guest_sigs[type_index as usize] {
            return s;
        }
        let s = b.import_signature(guest_signature(self.module.type_at(type_index)));
        self.guest_sigs[type_index as usize] = Some(s);
        s
    }

    fn call_slot(&mut self, b: &mut FunctionBuilder, func: Value, type_index: u32, args: &[Reg], dst: Option<Reg>) {
        let vm = self.vm();
        let sig = self.guest_sig(b, type_index);
        let slot = b.ins().imul_imm_u(func, 8);
        let slot = b.ins().iadd(self.slots, slot);
        let code = b.ins().load(types::I64, VM, slot, 0);
        b.ins().store(VM, func, vm, off::CALLEE_INDEX);
        let mut vals = vec![vm];
        vals.extend(args.iter().map(|a| self.get(b, *a)));
        let call = b.ins().call_indirect(sig, code, &vals);
        if let Some(d) = dst {
            let r = b.inst_results(call)[0];
            self.set(b, d, r);
        }
    }

    fn inst(&mut self, b: &mut FunctionBuilder, inst: &Inst) {
        match inst {
            Inst::GasCharge(c) => {
                let gas = b.ins().get_pinned_reg(types::I64);
                let short = b.ins().icmp_imm_s(IntCC::UnsignedLessThan, gas, *c as i64);
                let t = self.common.trap_block(b);
                let cont = b.create_block();
                let drained = b.create_block();
                b.set_cold_block(drained);
                b.ins().brif(short, drained, &[], cont, &[]);
                b.switch_to_block(drained);
                let zero = b.ins().iconst(types::I64, 0);
                b.ins().set_pinned_reg(zero);
                let code = b.ins().iconst(types::I64, TrapCode::GasExhausted as i64);
                let none = b.ins().iconst(types::I64, NO_DETAIL as i64);
                b.ins().jump(t, &[BlockArg::from(code), BlockArg::from(none)]);
                b.switch_to_block(cont);
                let left = b.ins().iadd_imm_s(gas, -(*c as i64));
                b.ins().set_pinned_reg(left);
            }
            Inst::Const { dst, val } => {
                let v = match val.ty() {
                    ValType::I32 => b.ins().iconst(types::I32, val.to_bits() as u32 as i64),
                    ValType::I64 => b.ins().iconst(types::I64, val.to_bits() as i64),
                    ValType::F32 => b.ins().f32const(f32::from_bits(val.to_bits() as u32)),
                    ValType::F64 => b.ins().f64const(f64::from_bits(val.to_bits())),
                };
                self.set(b, *dst, v);
            }
            Inst::Copy { dst, src } => {
                let v = self.get(b, *src);
                self.set(b, *dst, v);
            }
            Inst::Unary { dst, op, a } => {
                let a = self.get(b, *a);
                let v = self.unary(b, *op, a);
                self.set(b, *dst, v);
            }
            Inst::Binary { dst, op, a, b: rb } => {
                let x = self.get(b, *a);
                let y = self.get(b, *rb);
                let v = self.binary(b, *op, x, y);
                self.set(b, *dst, v);
            }
            Inst::Canon { dst, src } => {
                let v = self.get(b, *src);
                let nan = b.ins().fcmp(FloatCC::Unordered, v, v);
                let canon = match self.f.reg_type(*dst) {
                    ValType::F32 => b.ins().f32const(f32::from_bits(crate::runtime::value::CANON_NAN_F32)),
                    _ => b.ins().f64const(f64::from_bits(crate::runtime::value::CANON_NAN_F64)),
                };
                let r = b.ins().select(nan, canon, v);
                self.set(b, *dst, r);
            }
            Inst::Select { dst, cond, a, b: rb } => {
                let c = self.get(b, *cond);
                let x = self.get(b, *a);
                let y = self.get(b, *rb);
                let r = b.ins().select(c, x, y);
                self.set(b, *dst, r);
            }
            Inst::CheckedArith { dst, hook, a, b: rb } => {
                let x = self.get(b, *a);
                let y = self.get(b, *rb);
                let r = self.checked(b, *hook, x, y);
                self.set(b, *dst, r);
            }
            Inst::Load { dst, op, base, offset } => {
                let (p, fl) = self.address(b, *base, *offset, op.width());
                use LoadOp::*;
                let v = match op {
                    I32 => b.ins().load(types::I32, fl, p, 0),
                    I64 => b.ins().load(types::I64, fl, p, 0),
                    F32 => b.ins().load(types::F32, fl, p, 0),
                    F64 => b.ins().load(types::F64, fl, p, 0),
                    I32_8S => b.ins().sload8(types::I32, fl, p, 0),
                    I32_8U => b.ins().uload8(types::I32, fl, p, 0),
                    I32_16S => b.ins().sload16(types::I32, fl, p, 0),
                    I32_16U => b.ins().uload16(types::I32, fl, p, 0),
                    I64_8S => b.ins().sload8(types::I64, fl, p, 0),
                    I64_8U => b.ins().uload8(types::I64, fl, p, 0),
                    I64_16S => b.ins().sload16(types::I64, fl, p, 0),
                    I64_16U => b.ins().uload16(types::I64, fl, p, 0),
                    I64_32S => b.ins().sload32(fl, p, 0),
                    I64_32U => b.ins().uload32(fl, p, 0),
                };
                self.set(b, *dst, v);
            }
            Inst::Store { op, base, value, offset } => {
                let (p, fl) = self.address(b, *base, *offset, op.width());
                let v = self.get(b, *value);
                use StoreOp::*;
                match op {
                    I32 | I64 | F32 | F64 => b.ins().store(fl, v, p, 0),
                    I32_8 | I64_8 => b.ins().istore8(fl, v, p, 0),
                    I32_16 | I64_16 => b.ins().istore16(fl, v, p, 0),
                    I64_32 => b.ins().istore32(fl, v, p, 0),
                };
            }
            Inst::MemorySize { dst } => {
                let size = b.ins().load(types::I64, VM, self.vm(), off::MEM_SIZE);
                let pages = b.ins().ushr_imm_u(size, 16);
                let pages = b.ins().ireduce(types::I32, pages);
                self.set(b, *dst, pages);
            }
            Inst::MemoryGrow { dst, delta } => {
                let sig = *self
                    .grow_sig
                    .get_or_insert_with(|| b.import_signature(native_signature(&[types::I64, types::I32], Some(types::I32))));
                let f = b.ins().iconst(types::I64, rt::memory_grow as *const () as i64);
                let d = self.get(b, *delta);
                let call = b.ins().call_indirect(sig, f, &[self.vm(), d]);
                let r = b.inst_results(call)[0];
                self.set(b, *dst, r);
            }
            Inst::GlobalGet { dst, index } => {
                let ty = clif_type(self.module.globals[*index as usize].content);
                let v = b.ins().load(ty, VM, self.globals, (*index * 8) as i32);
                self.set(b, *dst, v);
            }
            Inst::GlobalSet { index, src } => {
                let v = self.get(b, *src);
                b.ins().store(VM, v, self.globals, (*index * 8) as i32);
            }
            Inst::Call { func, args, dst } => {
                let ti = self.module.func_types[*func as usize];
                let fv = b.ins().iconst(types::I64, *func as i64);
                self.call_slot(b, fv, ti, args, *dst);
            }
            Inst::CallIndirect { type_index, sig_id, index, args, dst } => {
                let vm = self.vm();
                let idx = self.get(b, *index);
                let idx = b.ins().uextend(types::I64, idx);
                let len = b.ins().load(types::I64, VM, vm, off::TABLE_LEN);
                let oob = b.ins().icmp(IntCC::UnsignedGreaterThanOrEqual, idx, len);
                self.common.trap_if(b, oob, TrapCode::UndefinedTableElement as u64, Some(idx));
                let table = b.ins().load(types::I64, VM, vm, off::TABLE);
                let at = b.ins().imul_imm_u(idx, 8);
                let entry = b.ins().iadd(table, at);
                let func = b.ins().load(types::I32, VM, entry, 0);
                let null = b.ins().icmp_imm_s(IntCC::Equal, func, -1);
                self.common.trap_if(b, null, TrapCode::UndefinedTableElement as u64, Some(idx));
                let sig = b.ins().load(types::I32, VM, entry, 4);
                let bad = b.ins().icmp_imm_s(IntCC::NotEqual, sig, *sig_id as i64);
                self.common.trap_if(b, bad, TrapCode::IndirectCallTypeMismatch as u64, Some(idx));
                let func = b.ins().uextend(types::I64, func);
                self.call_slot(b, func, *type_index, args, *dst);
            }
        }
    }

    fn terminator(&mut self, b: &mut FunctionBuilder, t: &Terminator, blocks: &[Block]) {
        match t {
            Terminator::Jump(to) => {
                b.ins().jump(blocks[*to as usize], &[]);
            }
            Terminator::Branch { cond, then_to, else_to } => {
                let c = self.get(b, *cond);
                b.ins().brif(c, blocks[*then_to as usize], &[], blocks[*else_to as usize], &[]);
            }
            Terminator::Switch { index, targets, default } => {
                let i = self.get(b, *index);
                let mut sw = Switch::new();
                for (k, to) in targets.iter().enumerate() {
                    sw.set_entry(k as u128, blocks[*to as usize]);
                }
                sw.emit(b, i, blocks[*default as usize]);
            }
            Terminator::Return(r) => {
                let vals: Vec<Value> = r.iter().map(|r| self.get(b, *r)).collect();
                self.pop_frame(b);
                b.ins().return_(&vals);
            }
            Terminator::Trap(code) => self.common.trap(b, *code as u64, None),
        }
    }

    fn unary(&mut self, b: &mut FunctionBuilder, op: NumOp, a: Value) -> Value {
        use NumOp::*;
        let bool32 = |b: &mut FunctionBuilder, c: Value| b.ins().uextend(types::I32, c);
        match op {
            I32Eqz | I64Eqz => {
                let c = b.ins().icmp_imm_s(IntCC::Equal, a, 0);
                bool32(b, c)
            }
            I32Clz | I64Clz => b.ins().clz(a),
            I32Ctz | I64Ctz => b.ins().ctz(a),
            I32Popcnt | I64Popcnt => b.ins().popcnt(a),
            F32Abs | F64Abs => b.ins().fabs(a),
            F32Neg | F64Neg => b.ins().fneg(a),
            F32Ceil | F64Ceil => b.ins().ceil(a),
            F32Floor | F64Floor => b.ins().floor(a),
            F32Trunc | F64Trunc => b.ins().trunc(a),
            F32Nearest | F64Nearest => b.ins().nearest(a),
            F32Sqrt | F64Sqrt => b.ins().sqrt(a),
            I32WrapI64 => b.ins().ireduce(types::I32, a),
            I64ExtendI32S => b.ins().sextend(types::I64, a),
            I64ExtendI32U => b.ins().uextend(types::I64, a),
            I32TruncF32S | I32TruncF32U | I64TruncF32S | I64TruncF32U | I32TruncF64S | I32TruncF64U
            | I64TruncF64S | I64TruncF64U => self.trunc(b, op, a),
            F32ConvertI32S | F32ConvertI64S => b.ins().fcvt_from_sint(types::F32, a),
            F32ConvertI32U | F32ConvertI64U => b.ins().fcvt_from_uint(types::F32, a),
            F64ConvertI32S | F64ConvertI64S => b.ins().fcvt_from_sint(types::F64, a),
            F64ConvertI32U | F64ConvertI64U => b.ins().fcvt_from_uint(types::F64, a),
            F32DemoteF64 => b.ins().fdemote(types::F32, a),
            F64PromoteF32 => b.ins().fpromote(types::F64, a),
            I32ReinterpretF32 => b.ins().bitcast(types::I32, MemFlagsData::new(), a),
            I64ReinterpretF64 => b.ins().bitcast(types::I64, MemFlagsData::new(), a),
            F32ReinterpretI32 => b.ins().bitcast(types::F32, MemFlagsData::new(), a),
            F64ReinterpretI64 => b.ins().bitcast(types::F64, MemFlagsData::new(), a),
            _ => unreachable!("{} is not unary", op.name()),
        }
    }

    /// Range-checked float to int conversion with the interpreter's bounds.
    fn trunc(&mut self, b: &mut FunctionBuilder, op: NumOp, a: Value) -> Value {
        use NumOp::*;
        let x = if b.func.dfg.value_type(a) == types::F32 { b.ins().fpromote(types::F64, a) } else { a };
        let (lo_inclusive, lo, hi) = match op {
            I32TruncF32S => (true, -2147483648.0, 2147483648.0),
            I32TruncF64S => (false, -2147483649.0, 2147483648.0),
            I32TruncF32U | I32TruncF64U => (false, -1.0, 4294967296.0),
            I64TruncF32S | I64TruncF64S => (true, -9223372036854775808.0, 9223372036854775808.0),
            _ => (false, -1.0, 18446744073709551616.0),
        };
        let lo = b.ins().f64const(lo);
        let hi = b.ins().f64const(hi);
        let above = b.ins().fcmp(
            if lo_inclusive { FloatCC::GreaterThanOrEqual } else { FloatCC::GreaterThan },
            x,
            lo,
        );
        let below = b.ins().fcmp(FloatCC::LessThan, x, hi);
        let ok = b.ins().band(above, below);
        let bad = b.ins().icmp_imm_s(IntCC::Equal, ok, 0);
        self.common.trap_if(b, bad, TrapCode::InvalidConversionToInteger as u64, None);
        let ty = clif_type(op.result());
        match op {
            I32TruncF32S | I32TruncF64S | I64TruncF32S | I64TruncF64S => b.ins().fcvt_to_sint_sat(ty, x),
            _ => b.ins().fcvt_to_uint_sat(ty, x),
        }
    }

    fn binary(&mut self, b: &mut FunctionBuilder, op: NumOp, x: Value, y: Value) -> Value {
        use NumOp::*;
        let cmp = |b: &mut FunctionBuilder, cc: IntCC| {
            let c = b.ins().icmp(cc, x, y);
            b.ins().uextend(types::I32, c)
        };
        let fcmp = |b: &mut FunctionBuilder, cc: FloatCC| {
            let c = b.ins().fcmp(cc, x, y);
            b.ins().uextend(types::I32, c)
        };
        match op {
            I32Eq | I64Eq => cmp(b, IntCC::Equal),
            I32Ne | I64Ne => cmp(b, IntCC::NotEqual),
            I32LtS | I64LtS => cmp(b, IntCC::SignedLessThan),
            I32LtU | I64LtU => cmp(b, IntCC::UnsignedLessThan),
            I32GtS | I64GtS => cmp(b, IntCC::SignedGreaterThan),
            I32GtU | I64GtU => cmp(b, IntCC::UnsignedGreaterThan),
            I32LeS | I64LeS => cmp(b, IntCC::SignedLessThanOrEqual),
            I32LeU | I64LeU => cmp(b, IntCC::UnsignedLessThanOrEqual),
            I32GeS | I64GeS => cmp(b, IntCC::SignedGreaterThanOrEqual),
            I32GeU | I64GeU => cmp(b, IntCC::UnsignedGreaterThanOrEqual),
            F32Eq | F64Eq => fcmp(b, FloatCC::Equal),
            F32Ne | F64Ne => fcmp(b, FloatCC::NotEqual),
            F32Lt | F64Lt => fcmp(b, FloatCC::LessThan),
            F32Gt | F64Gt => fcmp(b, FloatCC::GreaterThan),
            F32Le | F64Le => fcmp(b, FloatCC::LessThanOrEqual),
            F32Ge | F64Ge => fcmp(b, FloatCC::GreaterThanOrEqual),
            I32Add | I64Add => b.ins().iadd(x, y),
            I32Sub | I64Sub => b.ins().isub(x, y),
            I32Mul | I64Mul => b.ins().imul(x, y),
            I32And | I64And => b.ins().band(x, y),
            I32Or | I64Or => b.ins().bor(x, y),
            I32Xor | I64Xor => b.ins().bxor(x, y),
            I32Shl | I64Shl => b.ins().ishl(x, y),
            I32ShrS | I64ShrS => b.ins().sshr(x, y),
            I32ShrU | I64ShrU => b.ins().ushr(x, y),
            I32Rotl | I64Rotl => b.ins().rotl(x, y),
            I32Rotr | I64Rotr => b.ins().rotr(x, y),
            I32DivS | I64DivS | I32DivU | I64DivU | I32RemS | I64RemS | I32RemU | I64RemU => {
                let zero = b.ins().icmp_imm_s(IntCC::Equal, y, 0);
                self.common.trap_if(b, zero, TrapCode::IntegerDivideByZero as u64, None);
                let ty = b.func.dfg.value_type(x);
                let min = if ty == types::I32 { i32::MIN as i64 } else { i64::MIN };
                match op {
                    I32DivS | I64DivS => {
                        let a = b.ins().icmp_imm_s(IntCC::Equal, x, min);
                        let c = b.ins().icmp_imm_s(IntCC::Equal, y, -1);
                        let both = b.ins().band(a, c);
                        self.common.trap_if(b, both, TrapCode::IntegerOverflow as u64, None);
                        b.ins().sdiv(x, y)
                    }
                    I32RemS | I64RemS => {
                        // x % -1 is 0; avoid the hardware fault on MIN % -1.
                        let neg1 = b.ins().icmp_imm_s(IntCC::Equal, y, -1);
                        let one = b.ins().iconst(ty, 1);
                        let d = b.ins().select(neg1, one, y);
                        b.ins().srem(x, d)
                    }
                    I32DivU | I64DivU => b.ins().udiv(x, y),
                    _ => b.ins().urem(x, y),
                }
            }
            F32Add | F64Add => b.ins().fadd(x, y),
            F32Sub | F64Sub => b.ins().fsub(x, y),
            F32Mul | F64Mul => b.ins().fmul(x, y),
            F32Div | F64Div => b.ins().fdiv(x, y),
            F32Min | F64Min => b.ins().fmin(x, y),
            F32Max | F64Max => b.ins().fmax(x, y),
            F32Copysign | F64Copysign => b.ins().fcopysign(x, y),
            _ => unreachable!("{} is not binary", op.name()),
        }
    }

    fn checked(&mut self, b: &mut FunctionBuilder, hook: HookKind, x: Value, y: Value) -> Value {
        let signed = matches!(hook.int_type, HookInt::I32 | HookInt::I64);
        let (r, of) = match (hook.op, signed) {
            (HookOp::Add, true) => b.ins().sadd_overflow(x, y),
            (HookOp::Add, false) => b.ins().uadd_overflow(x, y),
            (HookOp::Sub, true) => b.ins().ssub_overflow(x, y),
            (HookOp::Sub, false) => b.ins().usub_overflow(x, y),
            (HookOp::Mul, true) => b.ins().smul_overflow(x, y),
            (HookOp::Mul, false) => b.ins().umul_overflow(x, y),
        };
        self.common.trap_if(b, of, TrapCode::CheckedArithmeticOverflow as u64, None);
        r
    }
}

/// Entry trampoline for guest signature `ty`: native `(vmctx, code, values)`.
/// Loads arguments from `values`, installs the gas register for the call
/// and stores the result and remaining gas back.
pub(crate) fn entry_trampoline(ty: &FuncType, fc: TargetFrontendConfig) -> Function {
    let mut func = Function::with_name_signature(
        UserFuncName::user(1, 0),
        native_signature(&[types::I64, types::I64, types::I64], None),
    );
    let mut ctx = FunctionBuilderContext::new();
    let mut b = FunctionBuilder::new(&mut func, &mut ctx);
    let entry = b.create_block();
    b.append_block_params_for_function_params(entry);
    b.switch_to_block(entry);
    let p = b.block_params(entry).to_vec();
    let (vm, code, values) = (p[0], p[1], p[2]);
    let saved = b.ins().get_pinned_reg(types::I64);
    let gas = b.ins().load(types::I64, VM, vm, off::GAS);
    b.ins().set_pinned_reg(gas);
    let mut args = vec![vm];
    for (i, t) in ty.params.iter().enumerate() {
        args.push(b.ins().load(clif_type(*t), VM, values, (i * 8) as i32));
    }
    let sig = b.import_signature(guest_signature(ty));
    let call = b.ins().call_indirect(sig, code, &args);
    if let Some(&r) = b.inst_results(call).first() {
        let r = widen(&mut b, r);
        b.ins().store(VM, r, values, 0);
    }
    let gas = b.ins().get_pinned_reg(types::I64);
    b.ins().store(VM, gas, vm, off::GAS);
    b.ins().set_pinned_reg(saved);
    b.ins().return_(&[]);
    b.seal_all_blocks();
    b.finalize(fc);
    func
}

/// Register bits of a value: integers zero-extended, floats as raw bits.
fn widen(b: &mut FunctionBuilder, v: Value) -> Value {
    let ty = b.func.dfg.value_type(v);
    let v = match ty {
        types::F32 => b.ins().bitcast(types::I32, MemFlagsData::new(), v),
        types::F64 => b.ins().bitcast(types::I64, MemFlagsData::new(), v),
        _ => v,
    };
    if b.func.dfg.value_type(v) == types::I32 {
        b.ins().uextend(types::I64, v)
    } else {
        v
    }
}

/// Stub for guest signature `ty`: resolves the callee named by
/// `vmctx.callee_index` and tail-calls it with the original arguments.
pub(crate) fn stub(ty: &FuncType, fc: TargetFrontendConfig) -> Function {
    let mut func = Function::with_name_signature(UserFuncName::user(2, 0), guest_signature(ty));
    let mut ctx = FunctionBuilderContext::new();
    let mut b = FunctionBuilder::new(&mut func, &mut ctx);
    let entry = b.create_block();
    b.append_block_params_for_function_params(entry);
    b.switch_to_block(entry);
    let params = b.block_params(entry).to_vec();
    let vm = params[0];
    let mut common = Common::new(vm);
    let idx = b.ins().load(types::I64, VM, vm, off::CALLEE_INDEX);
    let rsig = b.import_signature(native_signature(&[types::I64, types::I64], Some(types::I64)));
    let f = b.ins().iconst(types::I64, rt::resolve as *const () as i64);
    let call = b.ins().call_indirect(rsig, f, &[vm, idx]);
    let code = b.inst_results(call)[0];
    let failed = b.ins().icmp_imm_s(IntCC::Equal, code, 0);
    common.trap_if(&mut b, failed, TRAP_COMPILE, Some(idx));
    let sig = b.import_signature(guest_signature(ty));
    b.ins().return_call_indirect(sig, code, &params);
    common.finish(&mut b);
    b.seal_all_blocks();
    b.finalize(fc);
    func
}

/// Thunk for import `func_index`: flushes gas, calls the host through
/// `host_call`, reloads gas and traps on a failure status.
pub(crate) fn import_thunk(func_index: u32, ty: &FuncType, fc: TargetFrontendConfig) -> Function {
    let mut func = Function::with_name_signature(UserFuncName::user(3, func_index), guest_signature(ty));
    let mut ctx = FunctionBuilderContext::new();
    let mut b = FunctionBuilder::new(&mut func, &mut ctx);
    let entry = b.create_block();
    b.append_block_params_for_function_params(entry);
    b.switch_to_block(entry);
    let params = b.block_params(entry).to_vec();
    let vm = params[0];
    let mut common = Common::new(vm);
    let n = ty.params.len().max(1) as u32;
    let slot = b.create_sized_stack_slot(StackSlotData::new(StackSlotKind::ExplicitSlot, n * 8, 3));
    let values = b.ins().stack_addr(types::I64, slot, 0);
    for (i, p) in params[1..].iter().enumerate() {
        let v = widen(&mut b, *p);
        b.ins().store(VM, v, values, (i * 8) as i32);
    }
    let gas = b.ins().get_pinned_reg(types::I64);
    b.ins().store(VM, gas, vm, off::GAS);
    let hsig = b.import_signature(native_signature(&[types::I64; 3], Some(types::I64)));
    let f = b.ins().iconst(types::I64, rt::host_call as *const () as i64);
    let idx = b.ins().iconst(types::I64, func_index as i64);
    let call = b.ins().call_indirect(hsig, f, &[vm, idx, values]);
    let status = b.inst_results(call)[0];
    let gas = b.ins().load(types::I64, VM, vm, off::GAS);
    b.ins().set_pinned_reg(gas);
    let t = common.trap_block(&mut b);
    let ok = b.create_block();
    let none = b.ins().iconst(types::I64, NO_DETAIL as i64);
    b.ins().brif(status, t, &[BlockArg::from(status), BlockArg::from(none)], ok, &[]);
    b.switch_to_block(ok);
    let rets: Vec<Value> = ty.results.iter().map(|t| b.ins().load(clif_type(*t), VM, values, 0)).collect();
    b.ins().return_(&rets);
    common.finish(&mut b);
    b.seal_all_blocks();
    b.finalize(fc);
    func
}
