//! Decoded module, item order and byte offsets preserved from the binary.

use super::ops::Instr;
use super::types::{ExternKind, FuncType, GlobalType, MemoryType, TableType, ValType};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImportDesc {
    Func(u32),
    Table(TableType),
    Memory(MemoryType),
    Global(GlobalType),
}

impl ImportDesc {
    pub fn kind(&self) -> ExternKind {
        match self {
            ImportDesc::Func(_) => ExternKind::Func,
            ImportDesc::Table(_) => ExternKind::Table,
            ImportDesc::Memory(_) => ExternKind::Memory,
            ImportDesc::Global(_) => ExternKind::Global,
        }
    }
}

/// Import entry. Names are kept as raw bytes; UTF-8 is checked by validation
/// so the failure is ordered with the other rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    pub module: Vec<u8>,
    pub name: Vec<u8>,
    pub desc: ImportDesc,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub name: Vec<u8>,
    pub kind: ExternKind,
    pub index: u32,
    pub offset: u32,
}

/// Constant initializer expression (MVP forms only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstExpr {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
    GlobalGet(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Global {
    pub ty: GlobalType,
    pub init: ConstExpr,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSegment {
    pub table: u32,
    pub offset_expr: ConstExpr,
    pub funcs: Vec<u32>,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub memory: u32,
    pub offset_expr: ConstExpr,
    pub bytes: Vec<u8>,
    pub offset: u32,
}

/// Function section entry: type index plus where it was declared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncDecl {
    pub type_index: u32,
    /// Offset of the type-index LEB in the function section.
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuncBody {
    /// Run-length local declarations as written in the binary.
    pub locals: Vec<(u32, ValType)>,
    pub instrs: Vec<Instr>,
    /// Offset of the body's size prefix (the code-section entry).
    pub offset: u32,
    /// Offset of the first operator.
    pub code_offset: u32,
    /// Offset of each local declaration group, parallel to `locals`.
    pub local_offsets: Vec<u32>,
}

impl FuncBody {
    pub fn local_count(&self) -> u64 {
        self.locals.iter().map(|&(n, _)| n as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeEntry {
    pub ty: FuncType,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub ty: TableType,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryEntry {
    pub ty: MemoryType,
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CustomSection {
    pub name: Vec<u8>,
    pub offset: u32,
}

/// Known section ids in binary order, with the offset of each section's id byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SectionMark {
    pub id: u8,
    pub offset: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModuleAst {
    pub types: Vec<TypeEntry>,
    pub imports: Vec<Import>,
    pub functions: Vec<FuncDecl>,
    pub tables: Vec<TableEntry>,
    pub memories: Vec<MemoryEntry>,
    pub globals: Vec<Global>,
    pub exports: Vec<Export>,
    pub start: Option<(u32, u32)>,
    pub elements: Vec<ElementSegment>,
    pub code: Vec<FuncBody>,
    pub data: Vec<DataSegment>,
    pub customs: Vec<CustomSection>,
    pub sections: Vec<SectionMark>,
    /// Offset of the function section header, if present.
    pub function_section_offset: Option<u32>,
    /// Offset of the code section header, if present.
    pub code_section_offset: Option<u32>,
}

impl ModuleAst {
    pub fn imported_func_count(&self) -> u32 {
        self.imports.iter().filter(|i| matches!(i.desc, ImportDesc::Func(_))).count() as u32
    }

    pub fn imported_global_count(&self) -> u32 {
        self.imports.iter().filter(|i| matches!(i.desc, ImportDesc::Global(_))).count() as u32
    }
}
