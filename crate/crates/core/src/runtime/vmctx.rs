//! Per-instance context block shared with generated code and the C helper.

use std::ffi::c_void;
use std::mem::offset_of;
use std::ptr;
use std::sync::atomic::AtomicUsize;

/// One funcref table slot. `func == NULL_FUNC` is an empty entry.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableEntry {
    pub func: u32,
    pub sig_id: u32,
}

pub const NULL_FUNC: u32 = u32::MAX;

impl TableEntry {
    pub const NULL: TableEntry = TableEntry { func: NULL_FUNC, sig_id: 0 };
}

/// The first eight fields are mirrored by `vmctx_prefix` in csrc/detwasm_rt.c.
#[repr(C)]
pub struct VmCtx {
    pub jmpbuf: *mut c_void,
    pub trap_code: u64,
    pub trap_detail: u64,
    pub trap_gas: u64,
    pub guard_lo: u64,
    pub guard_hi: u64,
    pub mem_base: *mut u8,
    pub mem_size: u64,

    /// Remaining gas while generated code is not running (flushed around calls out).
    pub gas: u64,
    pub depth: u64,
    pub max_depth: u64,
    pub weight_used: u64,
    pub weight_budget: u64,
    pub globals: *mut u64,
    pub table: *const TableEntry,
    pub table_len: u64,
    /// Code pointers of every function, imports first.
    pub slots: *const AtomicUsize,
    /// Set by callers before entering a possibly unresolved slot.
    pub callee_index: u64,
    pub engine: *const c_void,
    pub instance: *mut c_void,
}

unsafe impl Send for VmCtx {}

impl Default for VmCtx {
    fn default() -> Self {
        VmCtx {
            jmpbuf: ptr::null_mut(),
            trap_code: 0,
            trap_detail: 0,
            trap_gas: 0,
            guard_lo: 0,
            guard_hi: 0,
            mem_base: ptr::null_mut(),
            mem_size: 0,
            gas: 0,
            depth: 0,
            max_depth: 0,
            weight_used: 0,
            weight_budget: 0,
            globals: ptr::null_mut(),
            table: ptr::null(),
            table_len: 0,
            slots: ptr::null(),
            callee_index: 0,
            engine: ptr::null(),
            instance: ptr::null_mut(),
        }
    }
}

/// Field offsets used by code generation.
pub mod off {
    use super::*;

    pub const TRAP_CODE: i32 = offset_of!(VmCtx, trap_code) as i32;
    pub const MEM_BASE: i32 = offset_of!(VmCtx, mem_base) as i32;
    pub const MEM_SIZE: i32 = offset_of!(VmCtx, mem_size) as i32;
    pub const GAS: i32 = offset_of!(VmCtx, gas) as i32;
    pub const DEPTH: i32 = offset_of!(VmCtx, depth) as i32;
    pub const MAX_DEPTH: i32 = offset_of!(VmCtx, max_depth) as i32;
    pub const WEIGHT_USED: i32 = offset_of!(VmCtx, weight_used) as i32;
    pub const WEIGHT_BUDGET: i32 = offset_of!(VmCtx, weight_budget) as i32;
    pub const GLOBALS: i32 = offset_of!(VmCtx, globals) as i32;
    pub const TABLE: i32 = offset_of!(VmCtx, table) as i32;
    pub const TABLE_LEN: i32 = offset_of!(VmCtx, table_len) as i32;
    pub const SLOTS: i32 = offset_of!(VmCtx, slots) as i32;
    pub const CALLEE_INDEX: i32 = offset_of!(VmCtx, callee_index) as i32;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_layout_matches_c() {
        assert_eq!(offset_of!(VmCtx, jmpbuf), 0);
        assert_eq!(offset_of!(VmCtx, trap_code), 8);
        assert_eq!(offset_of!(VmCtx, trap_detail), 16);
        assert_eq!(offset_of!(VmCtx, trap_gas), 24);
        assert_eq!(offset_of!(VmCtx, guard_lo), 32);
        assert_eq!(offset_of!(VmCtx, guard_hi), 40);
        assert_eq!(offset_of!(VmCtx, mem_base), 48);
        assert_eq!(offset_of!(VmCtx, mem_size), 56);
        assert_eq!(std::mem::size_of::<TableEntry>(), 8);
    }
}
