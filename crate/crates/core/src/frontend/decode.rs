//! Binary decoder for the MVP module format.

use super::ast::*;
use super::error::{ValidationCode, ValidationError};
use super::ops::{Instr, LoadOp, MemArg, NumOp, Operator, StoreOp};
use super::reader::{Reader, Result};
use super::types::{
    BlockType, ExternKind, FuncType, GlobalType, Limits, MemoryType, TableType, ValType,
};

const MAGIC: &[u8; 4] = b"\0asm";
const VERSION: u32 = 1;

fn unsupported(offset: u32, what: impl Into<String>) -> ValidationError {
    ValidationError::new(ValidationCode::UnsupportedFeature, offset, what)
}

/// Decode a module binary. Only structural well-formedness is checked here;
/// typing and the determinism limits belong to validation.
pub fn decode_module(bytes: &[u8]) -> Result<ModuleAst> {
    let mut r = Reader::new(bytes);
    let magic = r
        .bytes(4)
        .map_err(|_| ValidationError::malformed(0, "missing magic header"))?;
    if magic != MAGIC {
        return Err(ValidationError::malformed(0, "bad magic number"));
    }
    let version = r
        .u32_le()
        .map_err(|_| ValidationError::malformed(4, "missing version"))?;
    if version != VERSION {
        return Err(ValidationError::malformed(4, format!("unsupported version {version}")));
    }

    let mut ast = ModuleAst::default();
    let mut last_id = 0u8;
    while !r.is_empty() {
        let section_offset = r.offset();
        let id = r.u8()?;
        let size = r.var_u32()? as usize;
        if r.remaining() < size {
            return Err(ValidationError::malformed(section_offset, "section size exceeds input"));
        }
        let payload_base = r.offset() as usize;
        let payload = r.bytes(size)?;
        let mut s = Reader::with_base(payload, payload_base);
        match id {
            0 => {
                let name = s.name_bytes()?;
                ast.customs.push(CustomSection {
                    name: name.to_vec(),
                    offset: section_offset,
                });
                continue;
            }
            12 => return Err(unsupported(section_offset, "data count section (bulk memory)")),
            1..=11 => {}
            _ => return Err(ValidationError::malformed(section_offset, format!("unknown section id {id}"))),
        }
        if id <= last_id {
            return Err(ValidationError::malformed(section_offset, "section out of order or duplicated"));
        }
        last_id = id;
        ast.sections.push(SectionMark { id, offset: section_offset });
        match id {
            1 => decode_types(&mut s, &mut ast)?,
            2 => decode_imports(&mut s, &mut ast)?,
            3 => {
                ast.function_section_offset = Some(section_offset);
                decode_functions(&mut s, &mut ast)?
            }
            4 => decode_tables(&mut s, &mut ast)?,
            5 => decode_memories(&mut s, &mut ast)?,
            6 => decode_globals(&mut s, &mut ast)?,
            7 => decode_exports(&mut s, &mut ast)?,
            8 => {
                let at = s.offset();
                ast.start = Some((s.var_u32()?, at));
            }
            9 => decode_elements(&mut s, &mut ast)?,
            10 => {
                ast.code_section_offset = Some(section_offset);
                decode_code(&mut s, &mut ast)?
            }
            11 => decode_data(&mut s, &mut ast)?,
            _ => unreachable!(),
        }
        if !s.is_empty() {
            return Err(ValidationError::malformed(s.offset(), "section size mismatch"));
        }
    }

    if ast.functions.len() != ast.code.len() {
        let at = ast
            .code_section_offset
            .or(ast.function_section_offset)
            .unwrap_or(bytes.len() as u32);
        return Err(ValidationError::malformed(at, "function and code section lengths differ"));
    }
    Ok(ast)
}

/// Reads a vector length and rejects lengths that cannot fit in the remaining
/// bytes (every element takes at least one byte).
fn vec_len(r: &mut Reader<'_>) -> Result<u32> {
    let at = r.offset();
    let n = r.var_u32()?;
    if n as usize > r.remaining() {
        return Err(ValidationError::malformed(at, "vector length exceeds input"));
    }
    Ok(n)
}

fn val_type(r: &mut Reader<'_>) -> Result<ValType> {
    let at = r.offset();
    let b = r.u8()?;
    match ValType::from_byte(b) {
        Some(t) => Ok(t),
        None => match b {
            0x7B => Err(unsupported(at, "v128 value type (SIMD)")),
            0x70 | 0x6F => Err(unsupported(at, "reference value type")),
            _ => Err(ValidationError::malformed(at, format!("invalid value type 0x{b:02x}"))),
        },
    }
}

fn limits(r: &mut Reader<'_>) -> Result<Limits> {
    let at = r.offset();
    let flag = r.u8()?;
    match flag {
        0x00 => Ok(Limits { min: r.var_u32()?, max: None }),
        0x01 => {
            let min = r.var_u32()?;
            let max = r.var_u32()?;
            Ok(Limits { min, max: Some(max) })
        }
        0x02 | 0x03 => Err(unsupported(at, "shared memory (threads)")),
        0x04..=0x07 => Err(unsupported(at, "64-bit memory")),
        _ => Err(ValidationError::malformed(at, "invalid limits flag")),
    }
}

fn table_type(r: &mut Reader<'_>) -> Result<TableType> {
    let at = r.offset();
    match r.u8()? {
        0x70 => {}
        0x6F => return Err(unsupported(at, "externref table")),
        _ => return Err(ValidationError::malformed(at, "invalid table element type")),
    }
    Ok(TableType { limits: limits(r)? })
}

fn global_type(r: &mut Reader<'_>) -> Result<GlobalType> {
    let content = val_type(r)?;
    let at = r.offset();
    let mutable = match r.u8()? {
        0 => false,
        1 => true,
        _ => return Err(ValidationError::malformed(at, "invalid mutability flag")),
    };
    Ok(GlobalType { content, mutable })
}

fn decode_types(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let form = r.u8()?;
        if form != 0x60 {
            return Err(ValidationError::malformed(offset, "expected function type form 0x60"));
        }
        let np = vec_len(r)?;
        let mut params = Vec::with_capacity(np as usize);
        for _ in 0..np {
            params.push(val_type(r)?);
        }
        let nr = vec_len(r)?;
        let mut results = Vec::with_capacity(nr as usize);
        for _ in 0..nr {
            results.push(val_type(r)?);
        }
        ast.types.push(TypeEntry {
            ty: FuncType { params, results },
            offset,
        });
    }
    Ok(())
}

fn decode_imports(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let module = r.name_bytes()?.to_vec();
        let name = r.name_bytes()?.to_vec();
        let kind_at = r.offset();
        let kind = r.u8()?;
        let desc = match ExternKind::from_byte(kind) {
            Some(ExternKind::Func) => ImportDesc::Func(r.var_u32()?),
            Some(ExternKind::Table) => ImportDesc::Table(table_type(r)?),
            Some(ExternKind::Memory) => ImportDesc::Memory(MemoryType { limits: limits(r)? }),
            Some(ExternKind::Global) => ImportDesc::Global(global_type(r)?),
            None if kind == 0x04 => return Err(unsupported(kind_at, "tag import (exceptions)")),
            None => return Err(ValidationError::malformed(kind_at, "invalid import kind")),
        };
        ast.imports.push(Import {
            module,
            name,
            desc,
            offset,
        });
    }
    Ok(())
}

fn decode_functions(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        ast.functions.push(FuncDecl {
            type_index: r.var_u32()?,
            offset,
        });
    }
    Ok(())
}

fn decode_tables(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        ast.tables.push(TableEntry {
            ty: table_type(r)?,
            offset,
        });
    }
    Ok(())
}

fn decode_memories(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        ast.memories.push(MemoryEntry {
            ty: MemoryType { limits: limits(r)? },
            offset,
        });
    }
    Ok(())
}

fn const_expr(r: &mut Reader<'_>) -> Result<ConstExpr> {
    let at = r.offset();
    let op = r.u8()?;
    let e = match op {
        0x41 => ConstExpr::I32(r.var_i32()?),
        0x42 => ConstExpr::I64(r.var_i64()?),
        0x43 => ConstExpr::F32(r.u32_le()?),
        0x44 => ConstExpr::F64(r.u64_le()?),
        0x23 => ConstExpr::GlobalGet(r.var_u32()?),
        0x0B => {
            return Err(ValidationError::new(ValidationCode::TypeMismatch, at, "empty constant expression"))
        }
        _ => {
            return Err(ValidationError::new(
                ValidationCode::InvalidConstExpr,
                at,
                format!("opcode 0x{op:02x} not allowed in constant expression"),
            ))
        }
    };
    let end_at = r.offset();
    if r.u8()? != 0x0B {
        return Err(ValidationError::new(
            ValidationCode::InvalidConstExpr,
            end_at,
            "constant expression must be a single instruction",
        ));
    }
    Ok(e)
}

fn decode_globals(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let ty = global_type(r)?;
        let init = const_expr(r)?;
        ast.globals.push(Global { ty, init, offset });
    }
    Ok(())
}

fn decode_exports(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let name = r.name_bytes()?.to_vec();
        let kind_at = r.offset();
        let kind = ExternKind::from_byte(r.u8()?)
            .ok_or_else(|| ValidationError::malformed(kind_at, "invalid export kind"))?;
        let index = r.var_u32()?;
        ast.exports.push(Export {
            name,
            kind,
            index,
            offset,
        });
    }
    Ok(())
}

fn decode_elements(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let flags = r.var_u32()?;
        match flags {
            0 => {}
            1..=7 => return Err(unsupported(offset, "non-MVP element segment encoding")),
            _ => return Err(ValidationError::malformed(offset, "invalid element segment flags")),
        }
        let offset_expr = const_expr(r)?;
        let count = vec_len(r)?;
        let mut funcs = Vec::with_capacity(count as usize);
        for _ in 0..count {
            funcs.push(r.var_u32()?);
        }
        ast.elements.push(ElementSegment {
            table: 0,
            offset_expr,
            funcs,
            offset,
        });
    }
    Ok(())
}

fn decode_data(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let flags = r.var_u32()?;
        match flags {
            0 => {}
            1 | 2 => return Err(unsupported(offset, "non-MVP data segment encoding")),
            _ => return Err(ValidationError::malformed(offset, "invalid data segment flags")),
        }
        let offset_expr = const_expr(r)?;
        let bytes = r.name_bytes()?.to_vec();
        ast.data.push(DataSegment {
            memory: 0,
            offset_expr,
            bytes,
            offset,
        });
    }
    Ok(())
}

fn decode_code(r: &mut Reader<'_>, ast: &mut ModuleAst) -> Result<()> {
    let n = vec_len(r)?;
    for _ in 0..n {
        let offset = r.offset();
        let size = r.var_u32()? as usize;
        if r.remaining() < size {
            return Err(ValidationError::malformed(offset, "function body exceeds section"));
        }
        let base = r.offset() as usize;
        let body = r.bytes(size)?;
        ast.code.push(decode_body(body, base, offset)?);
    }
    Ok(())
}

fn decode_body(body: &[u8], base: usize, entry_offset: u32) -> Result<FuncBody> {
    let mut r = Reader::with_base(body, base);
    let groups = vec_len(&mut r)?;
    let mut locals = Vec::with_capacity(groups as usize);
    let mut local_offsets = Vec::with_capacity(groups as usize);
    for _ in 0..groups {
        local_offsets.push(r.offset());
        let count = r.var_u32()?;
        let ty = val_type(&mut r)?;
        locals.push((count, ty));
    }
    let code_offset = r.offset();
    let mut instrs = Vec::new();
    let mut depth: u32 = 1;
    loop {
        if r.is_empty() {
            return Err(ValidationError::malformed(r.offset(), "function body missing end"));
        }
        let offset = r.offset();
        let op = operator(&mut r)?;
        match op {
            Operator::Block(_) | Operator::Loop(_) | Operator::If(_) => depth += 1,
            Operator::End => depth -= 1,
            _ => {}
        }
        instrs.push(Instr { op, offset });
        if depth == 0 {
            break;
        }
    }
    if !r.is_empty() {
        return Err(ValidationError::malformed(r.offset(), "operators after final end"));
    }
    Ok(FuncBody {
        locals,
        instrs,
        offset: entry_offset,
        code_offset,
        local_offsets,
    })
}

fn block_type(r: &mut Reader<'_>) -> Result<BlockType> {
    let at = r.offset();
    match r.peek_u8() {
        Some(0x40) => {
            r.u8()?;
            Ok(BlockType::Empty)
        }
        Some(b) if ValType::from_byte(b).is_some() => {
            r.u8()?;
            Ok(BlockType::Value(ValType::from_byte(b).unwrap()))
        }
        Some(0x7B) | Some(0x70) | Some(0x6F) => Err(unsupported(at, "non-MVP block result type")),
        _ => {
            let idx = r.var_s33()?;
            if idx >= 0 {
                Err(unsupported(at, "type-indexed block type (multi-value)"))
            } else {
                Err(ValidationError::malformed(at, "invalid block type"))
            }
        }
    }
}

fn memarg(r: &mut Reader<'_>) -> Result<MemArg> {
    let align = r.var_u32()?;
    let offset = r.var_u32()?;
    Ok(MemArg { align, offset })
}

fn zero_byte(r: &mut Reader<'_>, what: &str) -> Result<()> {
    let at = r.offset();
    if r.u8()? != 0 {
        return Err(ValidationError::malformed(at, format!("non-zero reserved byte in {what}")));
    }
    Ok(())
}

fn operator(r: &mut Reader<'_>) -> Result<Operator> {
    let at = r.offset();
    let b = r.u8()?;
    let op = match b {
        0x00 => Operator::Unreachable,
        0x01 => Operator::Nop,
        0x02 => Operator::Block(block_type(r)?),
        0x03 => Operator::Loop(block_type(r)?),
        0x04 => Operator::If(block_type(r)?),
        0x05 => Operator::Else,
        0x0B => Operator::End,
        0x0C => Operator::Br(r.var_u32()?),
        0x0D => Operator::BrIf(r.var_u32()?),
        0x0E => {
            let n = vec_len(r)?;
            let mut targets = Vec::with_capacity(n as usize);
            for _ in 0..n {
                targets.push(r.var_u32()?);
            }
            let default = r.var_u32()?;
            Operator::BrTable {
                targets: targets.into_boxed_slice(),
                default,
            }
        }
        0x0F => Operator::Return,
        0x10 => Operator::Call(r.var_u32()?),
        0x11 => {
            let ty = r.var_u32()?;
            zero_byte(r, "call_indirect")?;
            Operator::CallIndirect(ty)
        }
        0x1A => Operator::Drop,
        0x1B => Operator::Select,
        0x20 => Operator::LocalGet(r.var_u32()?),
        0x21 => Operator::LocalSet(r.var_u32()?),
        0x22 => Operator::LocalTee(r.var_u32()?),
        0x23 => Operator::GlobalGet(r.var_u32()?),
        0x24 => Operator::GlobalSet(r.var_u32()?),
        0x28..=0x35 => Operator::Load(LoadOp::from_byte(b).unwrap(), memarg(r)?),
        0x36..=0x3E => Operator::Store(StoreOp::from_byte(b).unwrap(), memarg(r)?),
        0x3F => {
            zero_byte(r, "memory.size")?;
            Operator::MemorySize
        }
        0x40 => {
            zero_byte(r, "memory.grow")?;
            Operator::MemoryGrow
        }
        0x41 => Operator::I32Const(r.var_i32()?),
        0x42 => Operator::I64Const(r.var_i64()?),
        0x43 => Operator::F32Const(r.u32_le()?),
        0x44 => Operator::F64Const(r.u64_le()?),
        0x45..=0xBF => Operator::Numeric(NumOp::from_byte(b).unwrap()),
        0x06..=0x0A | 0x18 | 0x19 => return Err(unsupported(at, "exception handling")),
        0x12..=0x15 => return Err(unsupported(at, "tail/reference calls")),
        0x1C => return Err(unsupported(at, "typed select")),
        0x25 | 0x26 => return Err(unsupported(at, "table access instruction")),
        0xC0..=0xC4 => return Err(unsupported(at, "sign-extension operator")),
        0xD0..=0xD6 => return Err(unsupported(at, "reference type operator")),
        0xFB..=0xFE => return Err(unsupported(at, format!("prefixed opcode 0x{b:02x}"))),
        _ => return Err(ValidationError::malformed(at, format!("unknown opcode 0x{b:02x}"))),
    };
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_module() {
        let ast = decode_module(b"\0asm\x01\0\0\0").unwrap();
        assert!(ast.types.is_empty() && ast.code.is_empty() && ast.exports.is_empty());
    }

    #[test]
    fn bad_magic_and_version() {
        let e = decode_module(b"\0wasm\x01\0\0").unwrap_err();
        assert_eq!((e.code, e.offset), (ValidationCode::MalformedModule, 0));
        let e = decode_module(b"\0asm\x02\0\0\0").unwrap_err();
        assert_eq!((e.code, e.offset), (ValidationCode::MalformedModule, 4));
        let e = decode_module(b"\0as").unwrap_err();
        assert_eq!(e.offset, 0);
    }

    #[test]
    fn truncated_section() {
        // type section claiming 5 bytes with only 1 present
        let e = decode_module(b"\0asm\x01\0\0\0\x01\x05\x01").unwrap_err();
        assert_eq!((e.code, e.offset), (ValidationCode::MalformedModule, 8));
    }

    #[test]
    fn out_of_order_sections() {
        // function section (3) before type section (1)
        let bytes = b"\0asm\x01\0\0\0\x03\x01\x00\x01\x01\x00";
        let e = decode_module(bytes).unwrap_err();
        assert_eq!((e.code, e.offset), (ValidationCode::MalformedModule, 11));
    }

    #[test]
    fn reserved_byte_in_memory_size() {
        let mut m = b"\0asm\x01\0\0\0".to_vec();
        m.extend_from_slice(&[0x01, 0x04, 0x01, 0x60, 0x00, 0x00]); // type () -> ()
        m.extend_from_slice(&[0x03, 0x02, 0x01, 0x00]);
        m.extend_from_slice(&[0x05, 0x03, 0x01, 0x00, 0x01]);
        // body: memory.size with reserved byte 1, drop, end
        m.extend_from_slice(&[0x0A, 0x07, 0x01, 0x05, 0x00, 0x3F, 0x01, 0x1A, 0x0B]);
        let e = decode_module(&m).unwrap_err();
        assert_eq!(e.code, ValidationCode::MalformedModule);
        assert_eq!(e.offset, (m.len() - 3) as u32);
    }

    #[test]
    fn simd_prefix_is_unsupported() {
        let mut m = b"\0asm\x01\0\0\0".to_vec();
        m.extend_from_slice(&[0x01, 0x04, 0x01, 0x60, 0x00, 0x00]);
        m.extend_from_slice(&[0x03, 0x02, 0x01, 0x00]);
        m.extend_from_slice(&[0x0A, 0x06, 0x01, 0x04, 0x00, 0xFD, 0x0C, 0x0B]);
        let e = decode_module(&m).unwrap_err();
        assert_eq!(e.code, ValidationCode::UnsupportedFeature);
    }
}
