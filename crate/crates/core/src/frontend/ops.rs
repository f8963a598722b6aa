//! Decoded MVP operators.

use super::types::{BlockType, ValType};

/// Memory immediate: alignment exponent and static offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemArg {
    pub align: u32,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadOp {
    I32,
    I64,
    F32,
    F64,
    I32_8S,
    I32_8U,
    I32_16S,
    I32_16U,
    I64_8S,
    I64_8U,
    I64_16S,
    I64_16U,
    I64_32S,
    I64_32U,
}

impl LoadOp {
    pub fn from_byte(b: u8) -> Option<LoadOp> {
        use LoadOp::*;
        Some(match b {
            0x28 => I32,
            0x29 => I64,
            0x2A => F32,
            0x2B => F64,
            0x2C => I32_8S,
            0x2D => I32_8U,
            0x2E => I32_16S,
            0x2F => I32_16U,
            0x30 => I64_8S,
            0x31 => I64_8U,
            0x32 => I64_16S,
            0x33 => I64_16U,
            0x34 => I64_32S,
            0x35 => I64_32U,
            _ => return None,
        })
    }

    pub fn result(self) -> ValType {
        use LoadOp::*;
        match self {
            I32 | I32_8S | I32_8U | I32_16S | I32_16U => ValType::I32,
            I64 | I64_8S | I64_8U | I64_16S | I64_16U | I64_32S | I64_32U => ValType::I64,
            F32 => ValType::F32,
            F64 => ValType::F64,
        }
    }

    /// Access width in bytes.
    pub fn width(self) -> u32 {
        use LoadOp::*;
        match self {
            I32_8S | I32_8U | I64_8S | I64_8U => 1,
            I32_16S | I32_16U | I64_16S | I64_16U => 2,
            I32 | F32 | I64_32S | I64_32U => 4,
            I64 | F64 => 8,
        }
    }

    pub fn signed(self) -> bool {
        use LoadOp::*;
        matches!(self, I32_8S | I32_16S | I64_8S | I64_16S | I64_32S)
    }

    pub fn name(self) -> &'static str {
        use LoadOp::*;
        match self {
            I32 => "i32.load",
            I64 => "i64.load",
            F32 => "f32.load",
            F64 => "f64.load",
            I32_8S => "i32.load8_s",
            I32_8U => "i32.load8_u",
            I32_16S => "i32.load16_s",
            I32_16U => "i32.load16_u",
            I64_8S => "i64.load8_s",
            I64_8U => "i64.load8_u",
            I64_16S => "i64.load16_s",
            I64_16U => "i64.load16_u",
            I64_32S => "i64.load32_s",
            I64_32U => "i64.load32_u",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StoreOp {
    I32,
    I64,
    F32,
    F64,
    I32_8,
    I32_16,
    I64_8,
    I64_16,
    I64_32,
}

impl StoreOp {
    pub fn from_byte(b: u8) -> Option<StoreOp> {
        use StoreOp::*;
        Some(match b {
            0x36 => I32,
            0x37 => I64,
            0x38 => F32,
            0x39 => F64,
            0x3A => I32_8,
            0x3B => I32_16,
            0x3C => I64_8,
            0x3D => I64_16,
            0x3E => I64_32,
            _ => return None,
        })
    }

    pub fn operand(self) -> ValType {
        use StoreOp::*;
        match self {
            I32 | I32_8 | I32_16 => ValType::I32,
            I64 | I64_8 | I64_16 | I64_32 => ValType::I64,
            F32 => ValType::F32,
            F64 => ValType::F64,
        }
    }

    pub fn width(self) -> u32 {
        use StoreOp::*;
        match self {
            I32_8 | I64_8 => 1,
            I32_16 | I64_16 => 2,
            I32 | F32 | I64_32 => 4,
            I64 | F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        use StoreOp::*;
        match self {
            I32 => "i32.store",
            I64 => "i64.store",
            F32 => "f32.store",
            F64 => "f64.store",
            I32_8 => "i32.store8",
            I32_16 => "i32.store16",
            I64_8 => "i64.store8",
            I64_16 => "i64.store16",
            I64_32 => "i64.store32",
        }
    }
}

macro_rules! numeric_ops {
    ($($byte:literal => $variant:ident, $name:literal, [$($p:ident),*] -> $r:ident;)*) => {
        /// Stack-only numeric operators (opcodes 0x45..=0xBF).
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum NumOp {
            $($variant,)*
        }

        impl NumOp {
            pub fn from_byte(b: u8) -> Option<NumOp> {
                match b {
                    $($byte => Some(NumOp::$variant),)*
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $(NumOp::$variant => $name,)*
                }
            }

            pub fn params(self) -> &'static [ValType] {
                match self {
                    $(NumOp::$variant => &[$(ValType::$p),*],)*
                }
            }

            pub fn result(self) -> ValType {
                match self {
                    $(NumOp::$variant => ValType::$r,)*
                }
            }
        }
    };
}

numeric_ops! {
    0x45 => I32Eqz, "i32.eqz", [I32] -> I32;
    0x46 => I32Eq, "i32.eq", [I32, I32] -> I32;
    0x47 => I32Ne, "i32.ne", [I32, I32] -> I32;
    0x48 => I32LtS, "i32.lt_s", [I32, I32] -> I32;
    0x49 => I32LtU, "i32.lt_u", [I32, I32] -> I32;
    0x4A => I32GtS, "i32.gt_s", [I32, I32] -> I32;
    0x4B => I32GtU, "i32.gt_u", [I32, I32] -> I32;
    0x4C => I32LeS, "i32.le_s", [I32, I32] -> I32;
    0x4D => I32LeU, "i32.le_u", [I32, I32] -> I32;
    0x4E => I32GeS, "i32.ge_s", [I32, I32] -> I32;
    0x4F => I32GeU, "i32.ge_u", [I32, I32] -> I32;
    0x50 => I64Eqz, "i64.eqz", [I64] -> I32;
    0x51 => I64Eq, "i64.eq", [I64, I64] -> I32;
    0x52 => I64Ne, "i64.ne", [I64, I64] -> I32;
    0x53 => I64LtS, "i64.lt_s", [I64, I64] -> I32;
    0x54 => I64LtU, "i64.lt_u", [I64, I64] -> I32;
    0x55 => I64GtS, "i64.gt_s", [I64, I64] -> I32;
    0x56 => I64GtU, "i64.gt_u", [I64, I64] -> I32;
    0x57 => I64LeS, "i64.le_s", [I64, I64] -> I32;
    0x58 => I64LeU, "i64.le_u", [I64, I64] -> I32;
    0x59 => I64GeS, "i64.ge_s", [I64, I64] -> I32;
    0x5A => I64GeU, "i64.ge_u", [I64, I64] -> I32;
    0x5B => F32Eq, "f32.eq", [F32, F32] -> I32;
    0x5C => F32Ne, "f32.ne", [F32, F32] -> I32;
    0x5D => F32Lt, "f32.lt", [F32, F32] -> I32;
    0x5E => F32Gt, "f32.gt", [F32, F32] -> I32;
    0x5F => F32Le, "f32.le", [F32, F32] -> I32;
    0x60 => F32Ge, "f32.ge", [F32, F32] -> I32;
    0x61 => F64Eq, "f64.eq", [F64, F64] -> I32;
    0x62 => F64Ne, "f64.ne", [F64, F64] -> I32;
    0x63 => F64Lt, "f64.lt", [F64, F64] -> I32;
    0x64 => F64Gt, "f64.gt", [F64, F64] -> I32;
    0x65 => F64Le, "f64.le", [F64, F64] -> I32;
    0x66 => F64Ge, "f64.ge", [F64, F64] -> I32;
    0x67 => I32Clz, "i32.clz", [I32] -> I32;
    0x68 => I32Ctz, "i32.ctz", [I32] -> I32;
    0x69 => I32Popcnt, "i32.popcnt", [I32] -> I32;
    0x6A => I32Add, "i32.add", [I32, I32] -> I32;
    0x6B => I32Sub, "i32.sub", [I32, I32] -> I32;
    0x6C => I32Mul, "i32.mul", [I32, I32] -> I32;
    0x6D => I32DivS, "i32.div_s", [I32, I32] -> I32;
    0x6E => I32DivU, "i32.div_u", [I32, I32] -> I32;
    0x6F => I32RemS, "i32.rem_s", [I32, I32] -> I32;
    0x70 => I32RemU, "i32.rem_u", [I32, I32] -> I32;
    0x71 => I32And, "i32.and", [I32, I32] -> I32;
    0x72 => I32Or, "i32.or", [I32, I32] -> I32;
    0x73 => I32Xor, "i32.xor", [I32, I32] -> I32;
    0x74 => I32Shl, "i32.shl", [I32, I32] -> I32;
    0x75 => I32ShrS, "i32.shr_s", [I32, I32] -> I32;
    0x76 => I32ShrU, "i32.shr_u", [I32, I32] -> I32;
    0x77 => I32Rotl, "i32.rotl", [I32, I32] -> I32;
    0x78 => I32Rotr, "i32.rotr", [I32, I32] -> I32;
    0x79 => I64Clz, "i64.clz", [I64] -> I64;
    0x7A => I64Ctz, "i64.ctz", [I64] -> I64;
    0x7B => I64Popcnt, "i64.popcnt", [I64] -> I64;
    0x7C => I64Add, "i64.add", [I64, I64] -> I64;
    0x7D => I64Sub, "i64.sub", [I64, I64] -> I64;
    0x7E => I64Mul, "i64.mul", [I64, I64] -> I64;
    0x7F => I64DivS, "i64.div_s", [I64, I64] -> I64;
    0x80 => I64DivU, "i64.div_u", [I64, I64] -> I64;
    0x81 => I64RemS, "i64.rem_s", [I64, I64] -> I64;
    0x82 => I64RemU, "i64.rem_u", [I64, I64] -> I64;
    0x83 => I64And, "i64.and", [I64, I64] -> I64;
    0x84 => I64Or, "i64.or", [I64, I64] -> I64;
    0x85 => I64Xor, "i64.xor", [I64, I64] -> I64;
    0x86 => I64Shl, "i64.shl", [I64, I64] -> I64;
    0x87 => I64ShrS, "i64.shr_s", [I64, I64] -> I64;
    0x88 => I64ShrU, "i64.shr_u", [I64, I64] -> I64;
    0x89 => I64Rotl, "i64.rotl", [I64, I64] -> I64;
    0x8A => I64Rotr, "i64.rotr", [I64, I64] -> I64;
    0x8B => F32Abs, "f32.abs", [F32] -> F32;
    0x8C => F32Neg, "f32.neg", [F32] -> F32;
    0x8D => F32Ceil, "f32.ceil", [F32] -> F32;
    0x8E => F32Floor, "f32.floor", [F32] -> F32;
    0x8F => F32Trunc, "f32.trunc", [F32] -> F32;
    0x90 => F32Nearest, "f32.nearest", [F32] -> F32;
    0x91 => F32Sqrt, "f32.sqrt", [F32] -> F32;
    0x92 => F32Add, "f32.add", [F32, F32] -> F32;
    0x93 => F32Sub, "f32.sub", [F32, F32] -> F32;
    0x94 => F32Mul, "f32.mul", [F32, F32] -> F32;
    0x95 => F32Div, "f32.div", [F32, F32] -> F32;
    0x96 => F32Min, "f32.min", [F32, F32] -> F32;
    0x97 => F32Max, "f32.max", [F32, F32] -> F32;
    0x98 => F32Copysign, "f32.copysign", [F32, F32] -> F32;
    0x99 => F64Abs, "f64.abs", [F64] -> F64;
    0x9A => F64Neg, "f64.neg", [F64] -> F64;
    0x9B => F64Ceil, "f64.ceil", [F64] -> F64;
    0x9C => F64Floor, "f64.floor", [F64] -> F64;
    0x9D => F64Trunc, "f64.trunc", [F64] -> F64;
    0x9E => F64Nearest, "f64.nearest", [F64] -> F64;
    0x9F => F64Sqrt, "f64.sqrt", [F64] -> F64;
    0xA0 => F64Add, "f64.add", [F64, F64] -> F64;
    0xA1 => F64Sub, "f64.sub", [F64, F64] -> F64;
    0xA2 => F64Mul, "f64.mul", [F64, F64] -> F64;
    0xA3 => F64Div, "f64.div", [F64, F64] -> F64;
    0xA4 => F64Min, "f64.min", [F64, F64] -> F64;
    0xA5 => F64Max, "f64.max", [F64, F64] -> F64;
    0xA6 => F64Copysign, "f64.copysign", [F64, F64] -> F64;
    0xA7 => I32WrapI64, "i32.wrap_i64", [I64] -> I32;
    0xA8 => I32TruncF32S, "i32.trunc_f32_s", [F32] -> I32;
    0xA9 => I32TruncF32U, "i32.trunc_f32_u", [F32] -> I32;
    0xAA => I32TruncF64S, "i32.trunc_f64_s", [F64] -> I32;
    0xAB => I32TruncF64U, "i32.trunc_f64_u", [F64] -> I32;
    0xAC => I64ExtendI32S, "i64.extend_i32_s", [I32] -> I64;
    0xAD => I64ExtendI32U, "i64.extend_i32_u", [I32] -> I64;
    0xAE => I64TruncF32S, "i64.trunc_f32_s", [F32] -> I64;
    0xAF => I64TruncF32U, "i64.trunc_f32_u", [F32] -> I64;
    0xB0 => I64TruncF64S, "i64.trunc_f64_s", [F64] -> I64;
    0xB1 => I64TruncF64U, "i64.trunc_f64_u", [F64] -> I64;
    0xB2 => F32ConvertI32S, "f32.convert_i32_s", [I32] -> F32;
    0xB3 => F32ConvertI32U, "f32.convert_i32_u", [I32] -> F32;
    0xB4 => F32ConvertI64S, "f32.convert_i64_s", [I64] -> F32;
    0xB5 => F32ConvertI64U, "f32.convert_i64_u", [I64] -> F32;
    0xB6 => F32DemoteF64, "f32.demote_f64", [F64] -> F32;
    0xB7 => F64ConvertI32S, "f64.convert_i32_s", [I32] -> F64;
    0xB8 => F64ConvertI32U, "f64.convert_i32_u", [I32] -> F64;
    0xB9 => F64ConvertI64S, "f64.convert_i64_s", [I64] -> F64;
    0xBA => F64ConvertI64U, "f64.convert_i64_u", [I64] -> F64;
    0xBB => F64PromoteF32, "f64.promote_f32", [F32] -> F64;
    0xBC => I32ReinterpretF32, "i32.reinterpret_f32", [F32] -> I32;
    0xBD => I64ReinterpretF64, "i64.reinterpret_f64", [F64] -> I64;
    0xBE => F32ReinterpretI32, "f32.reinterpret_i32", [I32] -> F32;
    0xBF => F64ReinterpretI64, "f64.reinterpret_i64", [I64] -> F64;
}

impl NumOp {
    /// True when the operator touches a float type in its operands or result.
    pub fn involves_float(self) -> bool {
        self.result().is_float() || self.params().iter().any(|t| t.is_float())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operator {
    Unreachable,
    Nop,
    Block(BlockType),
    Loop(BlockType),
    If(BlockType),
    Else,
    End,
    Br(u32),
    BrIf(u32),
    BrTable { targets: Box<[u32]>, default: u32 },
    Return,
    Call(u32),
    CallIndirect(u32),
    Drop,
    Select,
    LocalGet(u32),
    LocalSet(u32),
    LocalTee(u32),
    GlobalGet(u32),
    GlobalSet(u32),
    Load(LoadOp, MemArg),
    Store(StoreOp, MemArg),
    MemorySize,
    MemoryGrow,
    I32Const(i32),
    I64Const(i64),
    /// Raw IEEE-754 bits.
    F32Const(u32),
    F64Const(u64),
    Numeric(NumOp),
}

/// One decoded operator and the offset of its opcode byte in the binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub op: Operator,
    pub offset: u32,
}
