//! Bindings to the C helper and the Rust functions generated code calls.

use std::sync::Once;

use crate::runtime::instance::Instance;
use crate::runtime::value::Value;
use crate::runtime::vmctx::VmCtx;

extern "C" {
    fn detwasm_enter(vm: *mut VmCtx, tramp: *const u8, callee: *const u8, values: *mut u64) -> i32;
    fn detwasm_trap(vm: *mut VmCtx, code: u64, detail: u64, gas: u64);
    fn detwasm_set_code_range(lo: usize, hi: usize);
    fn detwasm_install_handler();
}

/// Trap detail meaning "none".
pub const NO_DETAIL: u64 = u64::MAX;
/// Trap code reported when a stub could not compile its function.
pub const TRAP_COMPILE: u64 = 100;

pub(crate) fn register_code_range(lo: usize, hi: usize) {
    static HANDLER: Once = Once::new();
    unsafe { detwasm_set_code_range(lo, hi) };
    HANDLER.call_once(|| unsafe { detwasm_install_handler() });
}

/// Runs `tramp(vm, callee, values)`. Returns true if guest code trapped;
/// the trap is then described by the prefix fields of `vm`.
///
/// # Safety
/// `tramp` must be an entry trampoline and `callee` code matching its signature.
pub(crate) unsafe fn enter(vm: *mut VmCtx, tramp: *const u8, callee: *const u8, values: *mut u64) -> bool {
    detwasm_enter(vm, tramp, callee, values) != 0
}

pub(crate) fn trap_fn() -> usize {
    detwasm_trap as *const () as usize
}

pub(crate) extern "C" fn memory_grow(vm: *mut VmCtx, delta: u32) -> u32 {
    unsafe {
        let inst = &mut *((*vm).instance as *mut Instance);
        let r = inst.memory.grow(delta);
        (*vm).mem_size = inst.memory.size();
        r
    }
}

/// Calls import `func_index` with arguments in `values`; the result (if
/// any) replaces `values[0]`. Returns 0 or a trap code.
pub(crate) extern "C" fn host_call(vm: *mut VmCtx, func_index: u64, values: *mut u64) -> u64 {
    unsafe {
        let inst = &mut *((*vm).instance as *mut Instance);
        inst.gas.remaining = (*vm).gas;
        let program = inst.program().clone();
        let ty = program.module().func_type(func_index as u32);
        let args: Vec<Value> =
            ty.params.iter().enumerate().map(|(i, t)| Value::from_bits(*t, *values.add(i))).collect();
        let r = inst.call_import(func_index as u32, &args);
        (*vm).gas = inst.gas.remaining;
        (*vm).mem_size = inst.memory.size();
        match r {
            Ok(Some(v)) => {
                *values = v.to_bits();
                0
            }
            Ok(None) => 0,
            Err(code) => code as u64,
        }
    }
}

/// Entered from a stub: returns code for `index`, or 0 if it failed to compile.
pub(crate) extern "C" fn resolve(vm: *mut VmCtx, index: u64) -> usize {
    std::panic::catch_unwind(|| unsafe { crate::engine::resolve_from_stub(vm, index as u32) }).unwrap_or(0)
}
