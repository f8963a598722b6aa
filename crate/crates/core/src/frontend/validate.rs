//! dWasm validation: MVP typing plus the static determinism limits.
//!
//! Sections are visited in binary order, items in index order, and function
//! bodies operator by operator. The first violation under that order is the
//! one reported. Inside one operator, structural limits (instruction count,
//! nesting) are checked before typing; frame weight is checked after the
//! operator's stack effect.

use std::collections::{BTreeMap, HashSet};

use super::ast::{ConstExpr, FuncBody, ImportDesc, ModuleAst};
use super::error::{ValidationCode, ValidationError};
use super::limits::DwasmLimits;
use super::ops::{Operator, MemArg};
use super::types::{BlockType, ExternKind, FuncType, GlobalType, Limits, MemoryType, TableType, ValType};
use crate::dmir::hooks::{recognize_checked_hook, HookKind};

type Result<T> = std::result::Result<T, ValidationError>;

fn err(code: ValidationCode, offset: u32, detail: impl Into<String>) -> ValidationError {
    ValidationError::new(code, offset, detail)
}

/// Per-function static facts for every defined (non-imported) function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncInfo {
    pub type_index: u32,
    /// Declared locals, excluding parameters.
    pub locals: Vec<ValType>,
    pub frame_weight: u64,
    pub max_stack_weight: u64,
}

/// A decoded module that passed every dWasm rule.
#[derive(Debug, Clone)]
pub struct ValidatedModule {
    pub ast: ModuleAst,
    pub limits: DwasmLimits,
    /// Type index of every function in the function index space.
    pub func_types: Vec<u32>,
    /// Facts for defined functions, indexed from 0 (i.e. func index - imports).
    pub funcs: Vec<FuncInfo>,
    /// Function-import index -> recognized overflow-check hook.
    pub checked_hooks: BTreeMap<u32, HookKind>,
    /// Canonical signature id per type index: the first structurally equal type.
    pub sig_ids: Vec<u32>,
    pub exports: BTreeMap<String, (ExternKind, u32)>,
    /// (module, name) of every import, in import order.
    pub import_names: Vec<(String, String)>,
    pub globals: Vec<GlobalType>,
    pub memory: Option<MemoryType>,
    pub table: Option<TableType>,
    pub num_imported_funcs: u32,
    pub num_imported_globals: u32,
}

impl ValidatedModule {
    pub fn func_type(&self, func_index: u32) -> &FuncType {
        &self.ast.types[self.func_types[func_index as usize] as usize].ty
    }

    pub fn type_at(&self, type_index: u32) -> &FuncType {
        &self.ast.types[type_index as usize].ty
    }

    pub fn sig_id_of_func(&self, func_index: u32) -> u32 {
        self.sig_ids[self.func_types[func_index as usize] as usize]
    }

    pub fn total_funcs(&self) -> u32 {
        self.func_types.len() as u32
    }

    pub fn is_import(&self, func_index: u32) -> bool {
        func_index < self.num_imported_funcs
    }

    pub fn body(&self, func_index: u32) -> &FuncBody {
        &self.ast.code[(func_index - self.num_imported_funcs) as usize]
    }

    pub fn info(&self, func_index: u32) -> &FuncInfo {
        &self.funcs[(func_index - self.num_imported_funcs) as usize]
    }

    pub fn frame_weight(&self, func_index: u32) -> u64 {
        self.info(func_index).frame_weight
    }

    pub fn export_func(&self, name: &str) -> Option<u32> {
        match self.exports.get(name) {
            Some((ExternKind::Func, idx)) => Some(*idx),
            _ => None,
        }
    }

    /// Instruction count of a defined function's body (including the final `end`).
    pub fn instruction_count(&self, func_index: u32) -> usize {
        self.body(func_index).instrs.len()
    }
}

/// Validate a decoded module against MVP typing and the dWasm limits.
pub fn validate_dwasm(ast: ModuleAst, limits: &DwasmLimits) -> Result<ValidatedModule> {
    let mut v = ModuleValidator::new(&ast, limits);
    v.run()?;
    let ModuleValidator {
        func_types,
        funcs,
        checked_hooks,
        sig_ids,
        exports,
        import_names,
        globals,
        memory,
        table,
        num_imported_funcs,
        num_imported_globals,
        ..
    } = v;
    Ok(ValidatedModule {
        ast,
        limits: *limits,
        func_types,
        funcs,
        checked_hooks,
        sig_ids,
        exports,
        import_names,
        globals,
        memory,
        table,
        num_imported_funcs,
        num_imported_globals,
    })
}

/// Weighted frame size of one defined function: parameter weight + local
/// weight + peak weighted operand-stack depth. Limits are not applied.
pub fn compute_frame_weight(ast: &ModuleAst, defined_index: usize) -> Result<u64> {
    let unlimited = DwasmLimits {
        max_params: u32::MAX,
        max_locals: u32::MAX,
        max_frame_weight: u64::MAX,
        max_instructions_per_function: u32::MAX,
        max_control_nesting: u32::MAX,
        max_memory_pages: 65536,
        max_table_entries: u32::MAX,
        max_imports: u32::MAX,
        max_exports: u32::MAX,
        reject_floats: false,
    };
    let mut v = ModuleValidator::new(ast, &unlimited);
    v.prepare_index_spaces()?;
    let decl = ast
        .functions
        .get(defined_index)
        .ok_or_else(|| err(ValidationCode::UnknownIndex, 0, "no such function"))?;
    let info = v.function(decl.type_index, decl.offset, &ast.code[defined_index])?;
    Ok(info.frame_weight)
}

struct ModuleValidator<'a> {
    ast: &'a ModuleAst,
    limits: &'a DwasmLimits,
    func_types: Vec<u32>,
    funcs: Vec<FuncInfo>,
    checked_hooks: BTreeMap<u32, HookKind>,
    sig_ids: Vec<u32>,
    exports: BTreeMap<String, (ExternKind, u32)>,
    import_names: Vec<(String, String)>,
    globals: Vec<GlobalType>,
    memory: Option<MemoryType>,
    table: Option<TableType>,
    num_imported_funcs: u32,
    num_imported_globals: u32,
}

impl<'a> ModuleValidator<'a> {
    fn new(ast: &'a ModuleAst, limits: &'a DwasmLimits) -> Self {
        ModuleValidator {
            ast,
            limits,
            func_types: Vec::new(),
            funcs: Vec::new(),
            checked_hooks: BTreeMap::new(),
            sig_ids: Vec::new(),
            exports: BTreeMap::new(),
            import_names: Vec::new(),
            globals: Vec::new(),
            memory: None,
            table: None,
            num_imported_funcs: 0,
            num_imported_globals: 0,
        }
    }

    /// Populates index spaces without applying module-level rules; used by
    /// `compute_frame_weight` on a single body.
    fn prepare_index_spaces(&mut self) -> Result<()> {
        self.sig_ids = canonical_sig_ids(self.ast);
        for imp in &self.ast.imports {
            match imp.desc {
                ImportDesc::Func(t) => {
                    self.func_types.push(t);
                    self.num_imported_funcs += 1;
                }
                ImportDesc::Global(g) => {
                    self.globals.push(g);
                    self.num_imported_globals += 1;
                }
                ImportDesc::Memory(m) => self.memory = Some(m),
                ImportDesc::Table(t) => self.table = Some(t),
            }
        }
        self.func_types.extend(self.ast.functions.iter().map(|f| f.type_index));
        self.globals.extend(self.ast.globals.iter().map(|g| g.ty));
        if self.memory.is_none() {
            self.memory = self.ast.memories.first().map(|m| m.ty);
        }
        if self.table.is_none() {
            self.table = self.ast.tables.first().map(|t| t.ty);
        }
        Ok(())
    }

    fn check_float(&self, t: ValType, offset: u32) -> Result<()> {
        if self.limits.reject_floats && t.is_float() {
            return Err(err(ValidationCode::UnsupportedFeature, offset, "float types are disabled"));
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        self.limits
            .check()
            .map_err(|m| err(ValidationCode::MalformedModule, 0, m))?;
        self.sig_ids = canonical_sig_ids(self.ast);

        // Walk known sections in binary order. Sections that are absent are
        // simply skipped; the function/code pair is validated at the code
        // section (or at the end when the module has no code section).
        let ids: Vec<u8> = self.ast.sections.iter().map(|s| s.id).collect();
        for id in 1u8..=11 {
            if !ids.contains(&id) {
                continue;
            }
            match id {
                1 => self.types()?,
                2 => self.imports()?,
                3 => self.function_decls()?,
                4 => self.tables()?,
                5 => self.memories()?,
                6 => self.globals_section()?,
                7 => self.exports_section()?,
                8 => self.start()?,
                9 => self.elements()?,
                10 => self.code()?,
                11 => self.data()?,
                _ => unreachable!(),
            }
        }
        Ok(())
    }

    fn types(&mut self) -> Result<()> {
        for entry in &self.ast.types {
            if entry.ty.results.len() > 1 {
                return Err(err(
                    ValidationCode::UnsupportedFeature,
                    entry.offset,
                    "multiple results (multi-value)",
                ));
            }
            for &t in entry.ty.params.iter().chain(entry.ty.results.iter()) {
                self.check_float(t, entry.offset)?;
            }
        }
        Ok(())
    }

    fn imports(&mut self) -> Result<()> {
        for (i, imp) in self.ast.imports.iter().enumerate() {
            if i as u64 >= self.limits.max_imports as u64 {
                return Err(err(ValidationCode::ImportCountExceeded, imp.offset, "too many imports"));
            }
            let module = std::str::from_utf8(&imp.module)
                .map_err(|_| err(ValidationCode::InvalidUtf8Identifier, imp.offset, "import module name"))?;
            let name = std::str::from_utf8(&imp.name)
                .map_err(|_| err(ValidationCode::InvalidUtf8Identifier, imp.offset, "import item name"))?;
            self.import_names.push((module.to_string(), name.to_string()));
            match imp.desc {
                ImportDesc::Func(type_index) => {
                    let ty = self
                        .ast
                        .types
                        .get(type_index as usize)
                        .ok_or_else(|| err(ValidationCode::UnknownIndex, imp.offset, "unknown type index"))?;
                    if ty.ty.params.len() as u64 > self.limits.max_params as u64 {
                        return Err(err(
                            ValidationCode::ParamCountExceeded,
                            imp.offset,
                            format!("{} parameters", ty.ty.params.len()),
                        ));
                    }
                    let func_index = self.num_imported_funcs;
                    match recognize_checked_hook(module, name, &ty.ty) {
                        Ok(Some(kind)) => {
                            self.checked_hooks.insert(func_index, kind);
                        }
                        Ok(None) => {}
                        Err(e) => {
                            return Err(err(ValidationCode::HookSignatureMismatch, imp.offset, e.to_string()))
                        }
                    }
                    self.func_types.push(type_index);
                    self.num_imported_funcs += 1;
                }
                ImportDesc::Table(t) => {
                    self.table_limits(&t.limits, imp.offset)?;
                    if self.table.is_some() {
                        return Err(err(ValidationCode::UnsupportedFeature, imp.offset, "multiple tables"));
                    }
                    self.table = Some(t);
                }
                ImportDesc::Memory(m) => {
                    self.memory_limits(&m.limits, imp.offset)?;
                    if self.memory.is_some() {
                        return Err(err(ValidationCode::UnsupportedFeature, imp.offset, "multiple memories"));
                    }
                    self.memory = Some(m);
                }
                ImportDesc::Global(g) => {
                    self.check_float(g.content, imp.offset)?;
                    if g.mutable {
                        return Err(err(
                            ValidationCode::UnsupportedFeature,
                            imp.offset,
                            "mutable global import",
                        ));
                    }
                    self.globals.push(g);
                    self.num_imported_globals += 1;
                }
            }
        }
        Ok(())
    }

    fn function_decls(&mut self) -> Result<()> {
        for decl in &self.ast.functions {
            if decl.type_index as usize >= self.ast.types.len() {
                return Err(err(ValidationCode::UnknownIndex, decl.offset, "unknown type index"));
            }
            self.func_types.push(decl.type_index);
        }
        Ok(())
    }

    fn table_limits(&self, l: &Limits, offset: u32) -> Result<()> {
        if let Some(max) = l.max {
            if max < l.min {
                return Err(err(ValidationCode::TypeMismatch, offset, "table max below min"));
            }
        }
        let cap = self.limits.max_table_entries;
        if l.min > cap || l.max.is_some_and(|m| m > cap) {
            return Err(err(ValidationCode::TableLimitExceeded, offset, "table size above limit"));
        }
        Ok(())
    }

    fn memory_limits(&self, l: &Limits, offset: u32) -> Result<()> {
        if let Some(max) = l.max {
            if max < l.min {
                return Err(err(ValidationCode::TypeMismatch, offset, "memory max below min"));
            }
        }
        let cap = self.limits.max_memory_pages;
        if l.min > cap || l.max.is_some_and(|m| m > cap) {
            return Err(err(ValidationCode::MemoryLimitExceeded, offset, "memory pages above limit"));
        }
        Ok(())
    }

    fn tables(&mut self) -> Result<()> {
        for t in &self.ast.tables {
            if self.table.is_some() {
                return Err(err(ValidationCode::UnsupportedFeature, t.offset, "multiple tables"));
            }
            self.table_limits(&t.ty.limits, t.offset)?;
            self.table = Some(t.ty);
        }
        Ok(())
    }

    fn memories(&mut self) -> Result<()> {
        for m in &self.ast.memories {
            if self.memory.is_some() {
                return Err(err(ValidationCode::UnsupportedFeature, m.offset, "multiple memories"));
            }
            self.memory_limits(&m.ty.limits, m.offset)?;
            self.memory = Some(m.ty);
        }
        Ok(())
    }

    fn const_expr_type(&self, e: &ConstExpr, offset: u32) -> Result<ValType> {
        Ok(match *e {
            ConstExpr::I32(_) => ValType::I32,
            ConstExpr::I64(_) => ValType::I64,
            ConstExpr::F32(_) => {
                self.check_float(ValType::F32, offset)?;
                ValType::F32
            }
            ConstExpr::F64(_) => {
                self.check_float(ValType::F64, offset)?;
                ValType::F64
            }
            ConstExpr::GlobalGet(idx) => {
                if idx >= self.num_imported_globals {
                    return Err(err(
                        ValidationCode::InvalidConstExpr,
                        offset,
                        "constant expressions may only read imported globals",
                    ));
                }
                self.globals[idx as usize].content
            }
        })
    }

    fn globals_section(&mut self) -> Result<()> {
        for g in &self.ast.globals {
            self.check_float(g.ty.content, g.offset)?;
            let t = self.const_expr_type(&g.init, g.offset)?;
            if t != g.ty.content {
                return Err(err(ValidationCode::TypeMismatch, g.offset, "global initializer type"));
            }
            self.globals.push(g.ty);
        }
        Ok(())
    }

    fn total_funcs(&self) -> u32 {
        self.num_imported_funcs + self.ast.functions.len() as u32
    }

    fn exports_section(&mut self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, e) in self.ast.exports.iter().enumerate() {
            if i as u64 >= self.limits.max_exports as u64 {
                return Err(err(ValidationCode::ExportCountExceeded, e.offset, "too many exports"));
            }
            let name = std::str::from_utf8(&e.name)
                .map_err(|_| err(ValidationCode::InvalidUtf8Identifier, e.offset, "export name"))?;
            if !seen.insert(name.to_string()) {
                return Err(err(ValidationCode::DuplicateExport, e.offset, format!("duplicate export {name:?}")));
            }
            let ok = match e.kind {
                ExternKind::Func => e.index < self.total_funcs(),
                ExternKind::Table => e.index == 0 && self.table.is_some(),
                ExternKind::Memory => e.index == 0 && self.memory.is_some(),
                ExternKind::Global => (e.index as usize) < self.globals.len() + self.pending_globals(),
            };
            if !ok {
                return Err(err(ValidationCode::UnknownIndex, e.offset, "export index out of range"));
            }
            self.exports.insert(name.to_string(), (e.kind, e.index));
        }
        Ok(())
    }

    /// Globals declared in a global section not yet visited (never happens in
    /// well-ordered modules, kept for the exports check when section 6 is absent).
    fn pending_globals(&self) -> usize {
        if self.ast.sections.iter().any(|s| s.id == 6) {
            0
        } else {
            self.ast.globals.len()
        }
    }

    fn start(&mut self) -> Result<()> {
        let (idx, offset) = self.ast.start.expect("start section present");
        if idx >= self.total_funcs() {
            return Err(err(ValidationCode::UnknownIndex, offset, "start function index"));
        }
        let ty = &self.ast.types[self.func_type_index(idx) as usize].ty;
        if !ty.params.is_empty() || !ty.results.is_empty() {
            return Err(err(ValidationCode::InvalidStartFunction, offset, "start function must be () -> ()"));
        }
        Ok(())
    }

    fn func_type_index(&self, idx: u32) -> u32 {
        if (idx as usize) < self.func_types.len() {
            self.func_types[idx as usize]
        } else {
            self.ast.functions[(idx - self.num_imported_funcs) as usize].type_index
        }
    }

    fn elements(&mut self) -> Result<()> {
        for seg in &self.ast.elements {
            if self.table.is_none() {
                return Err(err(ValidationCode::UnknownIndex, seg.offset, "element segment without table"));
            }
            let t = self.const_expr_type(&seg.offset_expr, seg.offset)?;
            if t != ValType::I32 {
                return Err(err(ValidationCode::TypeMismatch, seg.offset, "element offset must be i32"));
            }
            for &f in &seg.funcs {
                if f >= self.total_funcs() {
                    return Err(err(ValidationCode::UnknownIndex, seg.offset, "element function index"));
                }
            }
        }
        Ok(())
    }

    fn data(&mut self) -> Result<()> {
        for seg in &self.ast.data {
            if self.memory.is_none() {
                return Err(err(ValidationCode::UnknownIndex, seg.offset, "data segment without memory"));
            }
            let t = self.const_expr_type(&seg.offset_expr, seg.offset)?;
            if t != ValType::I32 {
                return Err(err(ValidationCode::TypeMismatch, seg.offset, "data offset must be i32"));
            }
        }
        Ok(())
    }

    fn code(&mut self) -> Result<()> {
        for (decl, body) in self.ast.functions.iter().zip(self.ast.code.iter()) {
            let info = self.function(decl.type_index, decl.offset, body)?;
            self.funcs.push(info);
        }
        Ok(())
    }

    fn function(&self, type_index: u32, decl_offset: u32, body: &FuncBody) -> Result<FuncInfo> {
        let ty = &self.ast.types[type_index as usize].ty;
        let limits = self.limits;
        if ty.params.len() as u64 > limits.max_params as u64 {
            return Err(err(
                ValidationCode::ParamCountExceeded,
                decl_offset,
                format!("{} parameters", ty.params.len()),
            ));
        }
        let local_count = body.local_count();
        if local_count > limits.max_locals as u64 {
            return Err(err(
                ValidationCode::LocalCountExceeded,
                body.offset,
                format!("{local_count} locals"),
            ));
        }
        let mut locals = Vec::with_capacity(local_count as usize);
        for (&(n, t), &at) in body.locals.iter().zip(body.local_offsets.iter()) {
            self.check_float(t, at)?;
            locals.extend(std::iter::repeat(t).take(n as usize));
        }
        let base_weight = ty.param_weight() + locals.iter().map(|t| t.weight()).sum::<u64>();
        if base_weight > limits.max_frame_weight {
            return Err(err(
                ValidationCode::FrameWeightExceeded,
                body.offset,
                format!("parameters and locals weigh {base_weight}"),
            ));
        }
        let mut all_locals = ty.params.clone();
        all_locals.extend_from_slice(&locals);
        let max_stack_weight = BodyValidator::new(self, ty, &all_locals, base_weight, body.offset).run(body)?;
        Ok(FuncInfo {
            type_index,
            locals,
            frame_weight: base_weight + max_stack_weight,
            max_stack_weight,
        })
    }
}

fn canonical_sig_ids(ast: &ModuleAst) -> Vec<u32> {
    let mut ids = Vec::with_capacity(ast.types.len());
    for (i, t) in ast.types.iter().enumerate() {
        let first = ast.types[..i].iter().position(|u| u.ty == t.ty).unwrap_or(i);
        ids.push(first as u32);
    }
    ids
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Opd {
    Known(ValType),
    Unknown,
}

impl Opd {
    fn weight(self) -> u64 {
        match self {
            Opd::Known(t) => t.weight(),
            Opd::Unknown => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FrameKind {
    Func,
    Block,
    Loop,
    If,
    Else,
}

#[derive(Debug, Clone)]
struct Ctrl {
    kind: FrameKind,
    result: BlockType,
    height: usize,
    unreachable: bool,
}

impl Ctrl {
    fn label_types(&self) -> &'static [ValType] {
        match self.kind {
            FrameKind::Loop => &[],
            _ => self.result.results(),
        }
    }
}

struct BodyValidator<'v, 'a> {
    m: &'v ModuleValidator<'a>,
    func_ty: &'v FuncType,
    locals: &'v [ValType],
    base_weight: u64,
    entry_offset: u32,
    opds: Vec<Opd>,
    ctrls: Vec<Ctrl>,
    weight: u64,
    max_weight: u64,
    at: u32,
}

impl<'v, 'a> BodyValidator<'v, 'a> {
    fn new(
        m: &'v ModuleValidator<'a>,
        func_ty: &'v FuncType,
        locals: &'v [ValType],
        base_weight: u64,
        entry_offset: u32,
    ) -> Self {
        BodyValidator {
            m,
            func_ty,
            locals,
            base_weight,
            entry_offset,
            opds: Vec::new(),
            ctrls: Vec::new(),
            weight: 0,
            max_weight: 0,
            at: entry_offset,
        }
    }

    fn mismatch(&self, detail: impl Into<String>) -> ValidationError {
        err(ValidationCode::TypeMismatch, self.at, detail)
    }

    fn push(&mut self, o: Opd) {
        self.opds.push(o);
        self.weight += o.weight();
        self.max_weight = self.max_weight.max(self.weight);
    }

    fn push_t(&mut self, t: ValType) {
        self.push(Opd::Known(t));
    }

    fn pop(&mut self) -> Result<Opd> {
        let ctrl = self.ctrls.last().expect("control stack never empty inside body");
        if self.opds.len() == ctrl.height {
            if ctrl.unreachable {
                return Ok(Opd::Unknown);
            }
            return Err(self.mismatch("operand stack underflow"));
        }
        let o = self.opds.pop().unwrap();
        self.weight -= o.weight();
        Ok(o)
    }

    fn pop_t(&mut self, expect: ValType) -> Result<Opd> {
        let o = self.pop()?;
        match o {
            Opd::Known(t) if t != expect => Err(self.mismatch(format!("expected {expect}, found {t}"))),
            _ => Ok(o),
        }
    }

    fn pop_all(&mut self, types: &[ValType]) -> Result<()> {
        for &t in types.iter().rev() {
            self.pop_t(t)?;
        }
        Ok(())
    }

    fn push_ctrl(&mut self, kind: FrameKind, result: BlockType) {
        self.ctrls.push(Ctrl {
            kind,
            result,
            height: self.opds.len(),
            unreachable: false,
        });
    }

    fn pop_ctrl(&mut self) -> Result<Ctrl> {
        let ctrl = self.ctrls.last().cloned().expect("control stack never empty inside body");
        self.pop_all(ctrl.result.results())?;
        if self.opds.len() != ctrl.height {
            return Err(self.mismatch("values remaining on stack at block end"));
        }
        self.ctrls.pop();
        Ok(ctrl)
    }

    fn set_unreachable(&mut self) {
        let ctrl = self.ctrls.last_mut().unwrap();
        let h = ctrl.height;
        ctrl.unreachable = true;
        while self.opds.len() > h {
            let o = self.opds.pop().unwrap();
            self.weight -= o.weight();
        }
    }

    fn label(&self, depth: u32) -> Result<&Ctrl> {
        let n = self.ctrls.len();
        if depth as usize >= n {
            return Err(err(ValidationCode::UnknownIndex, self.at, "branch depth out of range"));
        }
        Ok(&self.ctrls[n - 1 - depth as usize])
    }

    fn local(&self, idx: u32) -> Result<ValType> {
        self.locals
            .get(idx as usize)
            .copied()
            .ok_or_else(|| err(ValidationCode::UnknownIndex, self.at, "local index out of range"))
    }

    fn global(&self, idx: u32) -> Result<GlobalType> {
        self.m
            .globals
            .get(idx as usize)
            .copied()
            .ok_or_else(|| err(ValidationCode::UnknownIndex, self.at, "global index out of range"))
    }

    fn need_memory(&self) -> Result<()> {
        if self.m.memory.is_none() {
            return Err(err(ValidationCode::UnknownIndex, self.at, "memory instruction without memory"));
        }
        Ok(())
    }

    fn check_align(&self, arg: &MemArg, width: u32) -> Result<()> {
        if arg.align >= 32 || (1u64 << arg.align) > width as u64 {
            return Err(err(ValidationCode::InvalidAlignment, self.at, "alignment larger than natural"));
        }
        Ok(())
    }

    fn float_gate(&self, t: ValType) -> Result<()> {
        self.m.check_float(t, self.at)
    }

    fn block_type(&self, bt: BlockType) -> Result<()> {
        if let BlockType::Value(t) = bt {
            self.float_gate(t)?;
        }
        Ok(())
    }

    /// Returns the peak weighted operand-stack depth.
    fn run(mut self, body: &FuncBody) -> Result<u64> {
        let limits = self.m.limits;
        let result = match self.func_ty.results.first() {
            Some(&t) => BlockType::Value(t),
            None => BlockType::Empty,
        };
        self.push_ctrl(FrameKind::Func, result);
        let mut count: u64 = 0;
        for instr in &body.instrs {
            self.at = instr.offset;
            count += 1;
            if count > limits.max_instructions_per_function as u64 {
                return Err(err(
                    ValidationCode::InstructionCountExceeded,
                    self.entry_offset,
                    format!("more than {} instructions", limits.max_instructions_per_function),
                ));
            }
            if matches!(instr.op, Operator::Block(_) | Operator::Loop(_) | Operator::If(_)) {
                // the function frame itself does not count toward nesting
                let depth = self.ctrls.len() as u64;
                if depth > limits.max_control_nesting as u64 {
                    return Err(err(
                        ValidationCode::NestingDepthExceeded,
                        self.at,
                        format!("nesting deeper than {}", limits.max_control_nesting),
                    ));
                }
            }
            self.step(&instr.op)?;
            if self.base_weight + self.weight > limits.max_frame_weight {
                return Err(err(
                    ValidationCode::FrameWeightExceeded,
                    self.at,
                    format!("frame weight {} exceeds limit", self.base_weight + self.weight),
                ));
            }
        }
        if !self.ctrls.is_empty() {
            return Err(err(ValidationCode::MalformedModule, self.at, "unterminated function body"));
        }
        Ok(self.max_weight)
    }

    fn step(&mut self, op: &Operator) -> Result<()> {
        use ValType::*;
        match op {
            Operator::Unreachable => self.set_unreachable(),
            Operator::Nop => {}
            Operator::Block(bt) => {
                self.block_type(*bt)?;
                self.push_ctrl(FrameKind::Block, *bt);
            }
            Operator::Loop(bt) => {
                self.block_type(*bt)?;
                self.push_ctrl(FrameKind::Loop, *bt);
            }
            Operator::If(bt) => {
                self.block_type(*bt)?;
                self.pop_t(I32)?;
                self.push_ctrl(FrameKind::If, *bt);
            }
            Operator::Else => {
                let ctrl = self.pop_ctrl()?;
                if ctrl.kind != FrameKind::If {
                    return Err(self.mismatch("else without matching if"));
                }
                self.push_ctrl(FrameKind::Else, ctrl.result);
            }
            Operator::End => {
                let ctrl = self.pop_ctrl()?;
                if ctrl.kind == FrameKind::If && !ctrl.result.results().is_empty() {
                    return Err(self.mismatch("if with a result requires an else branch"));
                }
                if ctrl.kind != FrameKind::Func {
                    for &t in ctrl.result.results() {
                        self.push_t(t);
                    }
                }
            }
            Operator::Br(d) => {
                let types = self.label(*d)?.label_types();
                self.pop_all(types)?;
                self.set_unreachable();
            }
            Operator::BrIf(d) => {
                self.pop_t(I32)?;
                let types = self.label(*d)?.label_types();
                self.pop_all(types)?;
                for &t in types {
                    self.push_t(t);
                }
            }
            Operator::BrTable { targets, default } => {
                self.pop_t(I32)?;
                let dtypes = self.label(*default)?.label_types();
                for &t in targets.iter() {
                    let ttypes = self.label(t)?.label_types();
                    if ttypes != dtypes {
                        return Err(self.mismatch("br_table targets have different arity"));
                    }
                }
                self.pop_all(dtypes)?;
                self.set_unreachable();
            }
            Operator::Return => {
                let results = self.func_ty.results.clone();
                self.pop_all(&results)?;
                self.set_unreachable();
            }
            Operator::Call(f) => {
                if *f >= self.m.func_types.len() as u32 {
                    return Err(err(ValidationCode::UnknownIndex, self.at, "call to unknown function"));
                }
                let ty = self.m.ast.types[self.m.func_types[*f as usize] as usize].ty.clone();
                self.pop_all(&ty.params)?;
                for &t in &ty.results {
                    self.push_t(t);
                }
            }
            Operator::CallIndirect(ti) => {
                if self.m.table.is_none() {
                    return Err(err(ValidationCode::UnknownIndex, self.at, "call_indirect without table"));
                }
                let ty = self
                    .m
                    .ast
                    .types
                    .get(*ti as usize)
                    .ok_or_else(|| err(ValidationCode::UnknownIndex, self.at, "unknown type index"))?
                    .ty
                    .clone();
                self.pop_t(I32)?;
                self.pop_all(&ty.params)?;
                for &t in &ty.results {
                    self.push_t(t);
                }
            }
            Operator::Drop => {
                self.pop()?;
            }
            Operator::Select => {
                self.pop_t(I32)?;
                let a = self.pop()?;
                let b = self.pop()?;
                let t = match (a, b) {
                    (Opd::Known(x), Opd::Known(y)) if x != y => {
                        return Err(self.mismatch("select operands differ"));
                    }
                    (Opd::Known(x), _) | (_, Opd::Known(x)) => Opd::Known(x),
                    _ => Opd::Unknown,
                };
                self.push(t);
            }
            Operator::LocalGet(i) => {
                let t = self.local(*i)?;
                self.push_t(t);
            }
            Operator::LocalSet(i) => {
                let t = self.local(*i)?;
                self.pop_t(t)?;
            }
            Operator::LocalTee(i) => {
                let t = self.local(*i)?;
                self.pop_t(t)?;
                self.push_t(t);
            }
            Operator::GlobalGet(i) => {
                let g = self.global(*i)?;
                self.push_t(g.content);
            }
            Operator::GlobalSet(i) => {
                let g = self.global(*i)?;
                if !g.mutable {
                    return Err(err(ValidationCode::ImmutableGlobal, self.at, "global.set on immutable global"));
                }
                self.pop_t(g.content)?;
            }
            Operator::Load(l, arg) => {
                self.need_memory()?;
                self.float_gate(l.result())?;
                self.check_align(arg, l.width())?;
                self.pop_t(I32)?;
                self.push_t(l.result());
            }
            Operator::Store(s, arg) => {
                self.need_memory()?;
                self.float_gate(s.operand())?;
                self.check_align(arg, s.width())?;
                self.pop_t(s.operand())?;
                self.pop_t(I32)?;
            }
            Operator::MemorySize => {
                self.need_memory()?;
                self.push_t(I32);
            }
            Operator::MemoryGrow => {
                self.need_memory()?;
                self.pop_t(I32)?;
                self.push_t(I32);
            }
            Operator::I32Const(_) => self.push_t(I32),
            Operator::I64Const(_) => self.push_t(I64),
            Operator::F32Const(_) => {
                self.float_gate(F32)?;
                self.push_t(F32)
            }
            Operator::F64Const(_) => {
                self.float_gate(F64)?;
                self.push_t(F64)
            }
            Operator::Numeric(n) => {
                if self.m.limits.reject_floats && n.involves_float() {
                    return Err(err(ValidationCode::UnsupportedFeature, self.at, "float operators are disabled"));
                }
                self.pop_all(n.params())?;
                self.push_t(n.result());
            }
        }
        Ok(())
    }
}
