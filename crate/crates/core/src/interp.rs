//! Reference interpreter over metered dMIR. Guest calls use an explicit
//! frame stack, so host recursion depth does not depend on guest depth.

use crate::dmir::eval::{canon, eval_binary, eval_checked, eval_unary, load_extend};
use crate::dmir::ir::{BlockId, DmirFunction, Inst, Terminator};
use crate::runtime::instance::Instance;
use crate::runtime::trap::{Trap, TrapCode};
use crate::runtime::value::Value;
use crate::runtime::vmctx::NULL_FUNC;

/// Called with (function index, block) on every block entry.
pub type BlockObserver<'a> = &'a mut dyn FnMut(u32, BlockId);

struct Frame {
    func: u32,
    block: BlockId,
    pc: usize,
    base: usize,
    /// Register in the caller receiving the result.
    ret: Option<u32>,
}

/// Runs `func` on `inst` with the instance's current gas state.
pub fn invoke_index(
    inst: &mut Instance,
    func: u32,
    args: &[Value],
    mut observer: Option<BlockObserver<'_>>,
) -> Result<Vec<Value>, Trap> {
    let program = inst.program().clone();
    let module = program.module();
    let nimp = module.num_imported_funcs;
    let trap = |inst: &Instance, code: TrapCode, detail: Option<u64>| Trap {
        code,
        gas_consumed: inst.gas.consumed(),
        detail,
    };

    if func < nimp {
        return match inst.call_import(func, args) {
            Ok(v) => Ok(v.into_iter().collect()),
            Err(code) => Err(trap(inst, code, None)),
        };
    }

    let max_depth = inst.config.max_depth;
    let budget = inst.config.weight_budget;
    let mut depth: u64 = 0;
    let mut weight: u64 = 0;
    let mut regs: Vec<u64> = Vec::new();
    let mut frames: Vec<Frame> = Vec::new();

    macro_rules! push_frame {
        ($callee:expr, $args:expr, $ret:expr) => {{
            let callee: u32 = $callee;
            let f: &DmirFunction = program.func(callee);
            if depth >= max_depth || weight + f.frame_weight > budget {
                return Err(trap(inst, TrapCode::WasmCallStackExceed, Some(depth)));
            }
            depth += 1;
            weight += f.frame_weight;
            let base = regs.len();
            regs.resize(base + f.reg_types.len(), 0);
            for (i, a) in $args.into_iter().enumerate() {
                regs[base + i] = a;
            }
            frames.push(Frame { func: callee, block: 0, pc: 0, base, ret: $ret });
            if let Some(obs) = observer.as_mut() {
                obs(callee, 0);
            }
        }};
    }

    push_frame!(func, args.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), None);

    'outer: loop {
        let fr = frames.last_mut().unwrap();
        let f = program.func(fr.func);
        let base = fr.base;
        let block = &f.blocks[fr.block as usize];
        let mut pc = fr.pc;
        while pc < block.insts.len() {
            let inst_ = &block.insts[pc];
            pc += 1;
            macro_rules! r {
                ($x:expr) => {
                    regs[base + $x as usize]
                };
            }
            match inst_ {
                Inst::GasCharge(c) => {
                    if !inst.gas.charge(*c) {
                        return Err(trap(inst, TrapCode::GasExhausted, None));
                    }
                }
                Inst::Const { dst, val } => r!(*dst) = val.to_bits(),
                Inst::Copy { dst, src } => r!(*dst) = r!(*src),
                Inst::Unary { dst, op, a } => match eval_unary(*op, r!(*a)) {
                    Ok(v) => r!(*dst) = v,
                    Err(code) => return Err(trap(inst, code, None)),
                },
                Inst::Binary { dst, op, a, b } => match eval_binary(*op, r!(*a), r!(*b)) {
                    Ok(v) => r!(*dst) = v,
                    Err(code) => return Err(trap(inst, code, None)),
                },
                Inst::Canon { dst, src } => r!(*dst) = canon(f.reg_type(*dst), r!(*src)),
                Inst::Select { dst, cond, a, b } => {
                    r!(*dst) = if r!(*cond) as u32 != 0 { r!(*a) } else { r!(*b) };
                }
                Inst::CheckedArith { dst, hook, a, b } => match eval_checked(*hook, r!(*a), r!(*b)) {
                    Ok(v) => r!(*dst) = v,
                    Err(code) => return Err(trap(inst, code, None)),
                },
                Inst::Load { dst, op, base: b, offset } => {
                    let ea = r!(*b) as u32 as u64 + *offset as u64;
                    let w = op.width() as u64;
                    let size = inst.memory.size();
                    if ea + w > size {
                        return Err(trap(inst, TrapCode::MemoryAccessOutOfBounds, Some(ea.max(size))));
                    }
                    let mut buf = [0u8; 8];
                    buf[..w as usize].copy_from_slice(&inst.memory.bytes()[ea as usize..(ea + w) as usize]);
                    r!(*dst) = load_extend(*op, u64::from_le_bytes(buf));
                }
                Inst::Store { op, base: b, value, offset } => {
                    let ea = r!(*b) as u32 as u64 + *offset as u64;
                    let w = op.width() as u64;
                    let size = inst.memory.size();
                    if ea + w > size {
                        return Err(trap(inst, TrapCode::MemoryAccessOutOfBounds, Some(ea.max(size))));
                    }
                    let bytes = r!(*value).to_le_bytes();
                    inst.memory.bytes_mut()[ea as usize..(ea + w) as usize].copy_from_slice(&bytes[..w as usize]);
                }
                Inst::MemorySize { dst } => r!(*dst) = inst.memory.pages() as u64,
                Inst::MemoryGrow { dst, delta } => {
                    r!(*dst) = inst.memory.grow(r!(*delta) as u32) as u64;
                }
                Inst::GlobalGet { dst, index } => r!(*dst) = inst.globals[*index as usize],
                Inst::GlobalSet { index, src } => inst.globals[*index as usize] = r!(*src),
                Inst::Call { func: callee, args, dst } => {
                    let vals: Vec<u64> = args.iter().map(|a| r!(*a)).collect();
                    if *callee < nimp {
                        let ty = module.func_type(*callee);
                        let vs: Vec<Value> = vals.iter().zip(&ty.params).map(|(b, t)| Value::from_bits(*t, *b)).collect();
                        match inst.call_import(*callee, &vs) {
                            Ok(v) => {
                                if let (Some(d), Some(v)) = (dst, v) {
                                    r!(*d) = v.to_bits();
                                }
                            }
                            Err(code) => return Err(trap(inst, code, None)),
                        }
                    } else {
                        frames.last_mut().unwrap().pc = pc;
                        push_frame!(*callee, vals, *dst);
                        continue 'outer;
                    }
                }
                Inst::CallIndirect { sig_id, index, args, dst, .. } => {
                    let idx = r!(*index) as u32;
                    let Some(entry) = inst.table.get(idx as usize).copied() else {
                        return Err(trap(inst, TrapCode::UndefinedTableElement, Some(idx as u64)));
                    };
                    if entry.func == NULL_FUNC {
                        return Err(trap(inst, TrapCode::UndefinedTableElement, Some(idx as u64)));
                    }
                    if entry.sig_id != *sig_id {
                        return Err(trap(inst, TrapCode::IndirectCallTypeMismatch, Some(idx as u64)));
                    }
                    let callee = entry.func;
                    let vals: Vec<u64> = args.iter().map(|a| r!(*a)).collect();
                    if callee < nimp {
                        let ty = module.func_type(callee);
                        let vs: Vec<Value> = vals.iter().zip(&ty.params).map(|(b, t)| Value::from_bits(*t, *b)).collect();
                        match inst.call_import(callee, &vs) {
                            Ok(v) => {
                                if let (Some(d), Some(v)) = (dst, v) {
                                    r!(*d) = v.to_bits();
                                }
                            }
                            Err(code) => return Err(trap(inst, code, None)),
                        }
                    } else {
                        frames.last_mut().unwrap().pc = pc;
                        push_frame!(callee, vals, *dst);
                        continue 'outer;
                    }
                }
            }
        }
        let next = match &block.term {
            Terminator::Jump(b) => *b,
            Terminator::Branch { cond, then_to, else_to } => {
                if regs[base + *cond as usize] as u32 != 0 {
                    *then_to
                } else {
                    *else_to
                }
            }
            Terminator::Switch { index, targets, default } => {
                let i = regs[base + *index as usize] as u32 as usize;
                *targets.get(i).unwrap_or(default)
            }
            Terminator::Trap(code) => return Err(trap(inst, *code, None)),
            Terminator::Return(r) => {
                let result = r.map(|r| regs[base + r as usize]);
                let done = frames.pop().unwrap();
                depth -= 1;
                weight -= program.func(done.func).frame_weight;
                regs.truncate(done.base);
                match frames.last() {
                    None => {
                        let f = program.func(done.func);
                        return Ok(match (result, f.sig.results.first()) {
                            (Some(b), Some(t)) => vec![Value::from_bits(*t, b)],
                            _ => vec![],
                        });
                    }
                    Some(caller) => {
                        if let (Some(d), Some(v)) = (done.ret, result) {
                            regs[caller.base + d as usize] = v;
                        }
                        continue 'outer;
                    }
                }
            }
        };
        let fr = frames.last_mut().unwrap();
        fr.block = next;
        fr.pc = 0;
        if let Some(obs) = observer.as_mut() {
            obs(fr.func, next);
        }
    }
}
