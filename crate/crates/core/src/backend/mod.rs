//! Native code generation in two tiers. FLAT translates metered dMIR
//! directly with a single-pass register allocator; FLAS runs the dMIR
//! passes first and compiles with the optimizing pipeline.

pub mod arena;
pub(crate) mod codegen;
pub(crate) mod rt;

use std::sync::OnceLock;
use std::time::Instant;

use cranelift_codegen::binemit::Reloc;
use cranelift_codegen::control::ControlPlane;
use cranelift_codegen::ir::{ExternalName, Function, LibCall};
use cranelift_codegen::isa::OwnedTargetIsa;
use cranelift_codegen::settings::{self, Configurable};
use cranelift_codegen::{Context, FinalizedRelocTarget};
use serde::{Deserialize, Serialize};

use crate::dmir::Program;
use crate::frontend::types::FuncType;
use crate::runtime::memory::MemoryMode;
use arena::{arena, CodeBlob};

/// Largest accepted machine code for one function.
pub const MAX_CODE_SIZE: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Flat,
    Flas,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Flat => "flat",
            Tier::Flas => "flas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("function {func_index}: {size} bytes of code exceeds the limit")]
    ResourceLimit { func_index: u32, size: usize },
    #[error("code generation failed: {0}")]
    Codegen(String),
    #[error("code arena exhausted")]
    ArenaFull,
}

/// One compilation record, serialized as a metrics JSON line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileMetrics {
    pub func_index: u32,
    pub tier: Tier,
    pub compile_us: u64,
    pub code_size_bytes: u64,
}

/// Compiled code for one function. Immutable once built.
pub struct Artifact {
    blob: CodeBlob,
    pub metrics: CompileMetrics,
}

impl Artifact {
    pub fn code(&self) -> *const u8 {
        self.blob.ptr()
    }

    pub fn tier(&self) -> Tier {
        self.metrics.tier
    }
}

fn build_isa(tier: Tier) -> OwnedTargetIsa {
    let mut flags = settings::builder();
    let set = |f: &mut settings::Builder, k: &str, v: &str| f.set(k, v).expect(k);
    set(&mut flags, "enable_pinned_reg", "true");
    set(&mut flags, "enable_probestack", "true");
    set(&mut flags, "probestack_strategy", "inline");
    set(&mut flags, "unwind_info", "false");
    set(&mut flags, "preserve_frame_pointers", "true");
    set(&mut flags, "enable_verifier", if cfg!(debug_assertions) { "true" } else { "false" });
    match tier {
        Tier::Flat => {
            set(&mut flags, "opt_level", "none");
            set(&mut flags, "regalloc_algorithm", "single_pass");
        }
        Tier::Flas => {
            set(&mut flags, "opt_level", "speed");
            set(&mut flags, "regalloc_algorithm", "backtracking");
        }
    }
    let builder = cranelift_native::builder().expect("host ISA unsupported");
    builder.finish(settings::Flags::new(flags)).expect("isa")
}

pub(crate) fn isa(tier: Tier) -> &'static OwnedTargetIsa {
    static FLAT: OnceLock<OwnedTargetIsa> = OnceLock::new();
    static FLAS: OnceLock<OwnedTargetIsa> = OnceLock::new();
    match tier {
        Tier::Flat => FLAT.get_or_init(|| build_isa(Tier::Flat)),
        Tier::Flas => FLAS.get_or_init(|| build_isa(Tier::Flas)),
    }
}

extern "C" fn ceil_f32(x: f32) -> f32 {
    x.ceil()
}
extern "C" fn ceil_f64(x: f64) -> f64 {
    x.ceil()
}
extern "C" fn floor_f32(x: f32) -> f32 {
    x.floor()
}
extern "C" fn floor_f64(x: f64) -> f64 {
    x.floor()
}
extern "C" fn trunc_f32(x: f32) -> f32 {
    x.trunc()
}
extern "C" fn trunc_f64(x: f64) -> f64 {
    x.trunc()
}
extern "C" fn nearest_f32(x: f32) -> f32 {
    x.round_ties_even()
}
extern "C" fn nearest_f64(x: f64) -> f64 {
    x.round_ties_even()
}

fn libcall_address(lc: LibCall) -> Option<usize> {
    Some(match lc {
        LibCall::CeilF32 => ceil_f32 as *const () as usize,
        LibCall::CeilF64 => ceil_f64 as *const () as usize,
        LibCall::FloorF32 => floor_f32 as *const () as usize,
        LibCall::FloorF64 => floor_f64 as *const () as usize,
        LibCall::TruncF32 => trunc_f32 as *const () as usize,
        LibCall::TruncF64 => trunc_f64 as *const () as usize,
        LibCall::NearestF32 => nearest_f32 as *const () as usize,
        LibCall::NearestF64 => nearest_f64 as *const () as usize,
        _ => return None,
    })
}

/// Compile `func` and return its machine code with relocations applied.
fn emit(func: Function, tier: Tier) -> Result<Vec<u8>, CompileError> {
    let mut ctx = Context::for_function(func);
    let compiled = ctx
        .compile(&**isa(tier), &mut ControlPlane::default())
        .map_err(|e| CompileError::Codegen(format!("{:?}", e.inner)))?;
    let mut code = compiled.code_buffer().to_vec();
    for r in compiled.buffer.relocs() {
        let addr = match (&r.kind, &r.target) {
            (Reloc::Abs8, FinalizedRelocTarget::ExternalName(ExternalName::LibCall(lc))) => libcall_address(*lc),
            _ => None,
        }
        .ok_or_else(|| CompileError::Codegen(format!("unsupported relocation {:?}", r.kind)))?;
        let at = r.offset as usize;
        code[at..at + 8].copy_from_slice(&((addr as i64 + r.addend) as u64).to_le_bytes());
    }
    Ok(code)
}

fn place(code: &[u8]) -> Result<CodeBlob, CompileError> {
    arena().place(code).ok_or(CompileError::ArenaFull)
}

/// Compile a defined function of `program` at `tier` for memory `mode`.
pub fn compile_function(program: &Program, func_index: u32, tier: Tier, mode: MemoryMode) -> Result<Artifact, CompileError> {
    let start = Instant::now();
    let optimized;
    let f = match tier {
        Tier::Flat => program.func(func_index),
        Tier::Flas => {
            optimized = program.optimized(func_index);
            &optimized
        }
    };
    let clif = codegen::translate(f, program.module(), mode, isa(tier).frontend_config());
    let code = emit(clif, tier)?;
    if code.len() > MAX_CODE_SIZE {
        return Err(CompileError::ResourceLimit { func_index, size: code.len() });
    }
    let blob = place(&code)?;
    let metrics = CompileMetrics {
        func_index,
        tier,
        compile_us: start.elapsed().as_micros() as u64,
        code_size_bytes: code.len() as u64,
    };
    Ok(Artifact { blob, metrics })
}

pub(crate) fn compile_trampoline(ty: &FuncType) -> Result<CodeBlob, CompileError> {
    place(&emit(codegen::entry_trampoline(ty, isa(Tier::Flat).frontend_config()), Tier::Flat)?)
}

pub(crate) fn compile_stub(ty: &FuncType) -> Result<CodeBlob, CompileError> {
    place(&emit(codegen::stub(ty, isa(Tier::Flat).frontend_config()), Tier::Flat)?)
}

pub(crate) fn compile_import_thunk(func_index: u32, ty: &FuncType) -> Result<CodeBlob, CompileError> {
    place(&emit(codegen::import_thunk(func_index, ty, isa(Tier::Flat).frontend_config()), Tier::Flat)?)
}
