//! Instance creation and state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dmir::eval::eval_checked;
use crate::dmir::Program;
use crate::frontend::ast::{ConstExpr, ImportDesc};
use crate::frontend::types::FuncType;
use crate::interp;
use crate::runtime::host::{GasState, HostContext, HostData, HostFault, HostFunc, HostRegistry};
use crate::runtime::memory::{LinearMemory, MemoryError, MemoryMode};
use crate::runtime::trap::{Trap, TrapCode};
use crate::runtime::value::Value;
use crate::runtime::vmctx::{TableEntry, VmCtx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub memory_mode: MemoryMode,
    /// Gas available to each invocation (and to the start function).
    pub gas_limit: u64,
    pub max_depth: u64,
    /// Call-stack budget in weighted slots.
    pub weight_budget: u64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            memory_mode: MemoryMode::GuardPage,
            gas_limit: 1_000_000_000,
            max_depth: 1024,
            weight_budget: 2_097_152,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InstantiationError {
    #[error("unresolved import {module}.{name}")]
    UnresolvedImport { module: String, name: String },
    #[error("import {module}.{name} has signature {found}, module expects {expected}")]
    SignatureMismatch { module: String, name: String, expected: String, found: String },
    #[error("segment {index} does not fit")]
    SegmentOutOfBounds { index: usize },
    #[error("start function trapped: {0}")]
    StartTrap(Trap),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

pub(crate) enum Import {
    Host(HostFunc),
    Hook(crate::dmir::HookKind),
}

pub struct Instance {
    program: Arc<Program>,
    registry: Arc<HostRegistry>,
    pub(crate) memory: LinearMemory,
    pub(crate) globals: Box<[u64]>,
    pub(crate) table: Box<[TableEntry]>,
    pub(crate) gas: GasState,
    pub(crate) config: InstanceConfig,
    pub(crate) imports: Vec<Import>,
    host_data: Option<HostData>,
    pub(crate) vmctx: Box<VmCtx>,
}

fn const_value(e: &ConstExpr, globals: &[u64], types: &[crate::frontend::types::GlobalType]) -> Value {
    match *e {
        ConstExpr::I32(v) => Value::I32(v),
        ConstExpr::I64(v) => Value::I64(v),
        ConstExpr::F32(b) => Value::F32(b),
        ConstExpr::F64(b) => Value::F64(b),
        ConstExpr::GlobalGet(i) => Value::from_bits(types[i as usize].content, globals[i as usize]),
    }
}

impl Instance {
    pub fn new(
        program: Arc<Program>,
        registry: Arc<HostRegistry>,
        config: InstanceConfig,
    ) -> Result<Instance, InstantiationError> {
        let m = program.module();
        let mut imports = Vec::new();
        let mut globals: Vec<u64> = Vec::new();
        for (i, imp) in m.ast.imports.iter().enumerate() {
            let (module, name) = &m.import_names[i];
            let unresolved = || InstantiationError::UnresolvedImport { module: module.clone(), name: name.clone() };
            match &imp.desc {
                ImportDesc::Func(ti) => {
                    let func_index = imports.len() as u32;
                    if let Some(&hook) = m.checked_hooks.get(&func_index) {
                        imports.push(Import::Hook(hook));
                        continue;
                    }
                    let f = registry.func(module, name).ok_or_else(unresolved)?;
                    let expected = m.type_at(*ti);
                    if &f.sig != expected {
                        return Err(InstantiationError::SignatureMismatch {
                            module: module.clone(),
                            name: name.clone(),
                            expected: expected.to_string(),
                            found: f.sig.to_string(),
                        });
                    }
                    imports.push(Import::Host(f.clone()));
                }
                ImportDesc::Global(g) => {
                    let v = registry.global(module, name).ok_or_else(unresolved)?;
                    if v.ty() != g.content {
                        return Err(InstantiationError::SignatureMismatch {
                            module: module.clone(),
                            name: name.clone(),
                            expected: g.content.to_string(),
                            found: v.ty().to_string(),
                        });
                    }
                    globals.push(v.to_bits());
                }
                // The registry offers no memories or tables.
                ImportDesc::Memory(_) | ImportDesc::Table(_) => return Err(unresolved()),
            }
        }
        for g in &m.ast.globals {
            let v = const_value(&g.init, &globals, &m.globals);
            globals.push(v.to_bits());
        }

        let mut memory = match m.memory {
            Some(mt) => {
                let max = mt.limits.max.unwrap_or(65536).min(m.limits.max_memory_pages);
                LinearMemory::new(config.memory_mode, mt.limits.min, max)?
            }
            None => LinearMemory::empty(config.memory_mode),
        };
        let mut table = vec![TableEntry::NULL; m.table.map_or(0, |t| t.limits.min as usize)];

        // Bounds of every segment are checked before anything is written.
        let mut elem_at = Vec::new();
        for (i, seg) in m.ast.elements.iter().enumerate() {
            let Value::I32(off) = const_value(&seg.offset_expr, &globals, &m.globals) else { unreachable!() };
            let start = off as u32 as u64;
            if start + seg.funcs.len() as u64 > table.len() as u64 {
                return Err(InstantiationError::SegmentOutOfBounds { index: i });
            }
            elem_at.push(start as usize);
        }
        let mut data_at = Vec::new();
        for (i, seg) in m.ast.data.iter().enumerate() {
            let Value::I32(off) = const_value(&seg.offset_expr, &globals, &m.globals) else { unreachable!() };
            let start = off as u32 as u64;
            if start + seg.bytes.len() as u64 > memory.size() {
                return Err(InstantiationError::SegmentOutOfBounds { index: m.ast.elements.len() + i });
            }
            data_at.push(start);
        }
        for (seg, &start) in m.ast.elements.iter().zip(&elem_at) {
            for (j, &f) in seg.funcs.iter().enumerate() {
                table[start + j] = TableEntry { func: f, sig_id: m.sig_id_of_func(f) };
            }
        }
        for (seg, &start) in m.ast.data.iter().zip(&data_at) {
            memory.write(start, &seg.bytes);
        }

        let host_data = Some(registry.init_data());
        let mut inst = Instance {
            program: program.clone(),
            registry,
            memory,
            globals: globals.into_boxed_slice(),
            table: table.into_boxed_slice(),
            gas: GasState::new(config.gas_limit),
            config,
            imports,
            host_data,
            vmctx: Box::default(),
        };
        if let Some((start, _)) = m.ast.start {
            inst.reset_gas();
            interp::invoke_index(&mut inst, start, &[], None).map_err(InstantiationError::StartTrap)?;
        }
        Ok(inst)
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.program
    }

    pub fn config(&self) -> &InstanceConfig {
        &self.config
    }

    pub fn set_gas_limit(&mut self, limit: u64) {
        self.config.gas_limit = limit;
    }

    pub fn set_stack_limits(&mut self, max_depth: u64, weight_budget: u64) {
        self.config.max_depth = max_depth;
        self.config.weight_budget = weight_budget;
    }

    pub fn reset_gas(&mut self) {
        self.gas = GasState::new(self.config.gas_limit);
    }

    /// Gas state of the last invocation.
    pub fn gas(&self) -> GasState {
        self.gas
    }

    pub fn memory(&self) -> &LinearMemory {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut LinearMemory {
        &mut self.memory
    }

    pub fn memory_hash(&self) -> u64 {
        self.memory.hash()
    }

    pub fn global(&self, index: u32) -> Value {
        Value::from_bits(self.program.module().globals[index as usize].content, self.globals[index as usize])
    }

    pub fn table(&self) -> &[TableEntry] {
        &self.table
    }

    pub fn func_type(&self, func_index: u32) -> &FuncType {
        self.program.module().func_type(func_index)
    }

    /// Calls an imported function with gas already synchronized into `self.gas`.
    pub(crate) fn call_import(&mut self, func_index: u32, args: &[Value]) -> Result<Option<Value>, TrapCode> {
        match &self.imports[func_index as usize] {
            Import::Hook(hook) => {
                let r = eval_checked(*hook, args[0].to_bits(), args[1].to_bits())?;
                Ok(Some(Value::from_bits(hook.int_type.storage(), r)))
            }
            Import::Host(f) => {
                let f = f.clone();
                let data = self.host_data.as_mut().expect("host context");
                let mut cx = HostContext::new(&mut self.gas, &mut self.memory, data);
                let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| (f.callable)(&mut cx, args)));
                let exhausted = cx.exhausted();
                match out {
                    _ if exhausted => {
                        self.gas.remaining = 0;
                        Err(TrapCode::GasExhausted)
                    }
                    Ok(Ok(vals)) => {
                        let ok = vals.len() == f.sig.results.len()
                            && vals.iter().zip(&f.sig.results).all(|(v, t)| v.ty() == *t);
                        if !ok {
                            return Err(TrapCode::HostError);
                        }
                        Ok(vals.first().copied())
                    }
                    Ok(Err(HostFault::GasExhausted)) => {
                        self.gas.remaining = 0;
                        Err(TrapCode::GasExhausted)
                    }
                    Ok(Err(HostFault::Error(_))) | Err(_) => Err(TrapCode::HostError),
                }
            }
        }
    }
}

impl Drop for Instance {
    fn drop(&mut self) {
        if let Some(d) = self.host_data.take() {
            self.registry.destroy_data(d);
        }
    }
}
