use std::fmt;

use crate::frontend::types::ValType;

pub const CANON_NAN_F32: u32 = 0x7FC0_0000;
pub const CANON_NAN_F64: u64 = 0x7FF8_0000_0000_0000;

/// A typed Wasm value. Floats are kept as raw bits so equality is bitwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
}

impl Value {
    pub fn ty(self) -> ValType {
        match self {
            Value::I32(_) => ValType::I32,
            Value::I64(_) => ValType::I64,
            Value::F32(_) => ValType::F32,
            Value::F64(_) => ValType::F64,
        }
    }

    pub fn zero(ty: ValType) -> Value {
        Value::from_bits(ty, 0)
    }

    /// Raw 64-bit slot representation; 32-bit values are zero-extended.
    pub fn to_bits(self) -> u64 {
        match self {
            Value::I32(v) => v as u32 as u64,
            Value::I64(v) => v as u64,
            Value::F32(b) => b as u64,
            Value::F64(b) => b,
        }
    }

    pub fn from_bits(ty: ValType, bits: u64) -> Value {
        match ty {
            ValType::I32 => Value::I32(bits as u32 as i32),
            ValType::I64 => Value::I64(bits as i64),
            ValType::F32 => Value::F32(bits as u32),
            ValType::F64 => Value::F64(bits),
        }
    }

    pub fn f32(v: f32) -> Value {
        Value::F32(v.to_bits())
    }

    pub fn f64(v: f64) -> Value {
        Value::F64(v.to_bits())
    }

    /// Parse a `type:value` literal such as `i32:10`, `i64:-3`, `f64:1.5`
    /// or `i32:0xff`. Float hex literals give the raw bit pattern.
    pub fn parse_literal(s: &str) -> Result<Value, String> {
        let (ty, v) = s.split_once(':').ok_or_else(|| format!("expected type:value, got {s:?}"))?;
        let bad = || format!("bad {ty} literal {v:?}");
        let hex = v.strip_prefix("0x").or_else(|| v.strip_prefix("0X"));
        Ok(match ty {
            "i32" => match hex {
                Some(h) => Value::I32(u32::from_str_radix(h, 16).map_err(|_| bad())? as i32),
                None => Value::I32(parse_int(v, 32).ok_or_else(bad)? as u32 as i32),
            },
            "i64" => match hex {
                Some(h) => Value::I64(u64::from_str_radix(h, 16).map_err(|_| bad())? as i64),
                None => Value::I64(parse_int(v, 64).ok_or_else(bad)? as i64),
            },
            "f32" => match hex {
                Some(h) => Value::F32(u32::from_str_radix(h, 16).map_err(|_| bad())?),
                None => Value::f32(v.parse().map_err(|_| bad())?),
            },
            "f64" => match hex {
                Some(h) => Value::F64(u64::from_str_radix(h, 16).map_err(|_| bad())?),
                None => Value::f64(v.parse().map_err(|_| bad())?),
            },
            _ => return Err(format!("unknown type {ty:?}")),
        })
    }
}

/// Accepts both signed and unsigned spellings (`i32:4294967295` is -1).
fn parse_int(v: &str, bits: u32) -> Option<u64> {
    let x: i128 = v.parse().ok()?;
    let lo = -(1i128 << (bits - 1));
    let hi = 1i128 << bits;
    (lo..hi).contains(&x).then_some(x as u64)
}

impl fmt::Display for Value {
    /// Integers print as signed decimal; floats print as a decimal when
    /// finite or infinite, and as `nan:0x<bits>` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Value::I32(v) => write!(f, "{v}"),
            Value::I64(v) => write!(f, "{v}"),
            Value::F32(b) => {
                let x = f32::from_bits(b);
                if x.is_nan() {
                    write!(f, "nan:0x{b:08x}")
                } else {
                    write!(f, "{x:?}")
                }
            }
            Value::F64(b) => {
                let x = f64::from_bits(b);
                if x.is_nan() {
                    write!(f, "nan:0x{b:016x}")
                } else {
                    write!(f, "{x:?}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(Value::parse_literal("i32:10"), Ok(Value::I32(10)));
        assert_eq!(Value::parse_literal("i32:-1"), Ok(Value::I32(-1)));
        assert_eq!(Value::parse_literal("i32:4294967295"), Ok(Value::I32(-1)));
        assert_eq!(Value::parse_literal("i32:0xff"), Ok(Value::I32(255)));
        assert_eq!(Value::parse_literal("i64:18446744073709551615"), Ok(Value::I64(-1)));
        assert_eq!(Value::parse_literal("f64:1.5"), Ok(Value::f64(1.5)));
        assert_eq!(Value::parse_literal("f32:0x7fc00000"), Ok(Value::F32(CANON_NAN_F32)));
        assert!(Value::parse_literal("i32").is_err());
        assert!(Value::parse_literal("i8:1").is_err());
        assert!(Value::parse_literal("i32:4294967296").is_err());
    }

    #[test]
    fn display() {
        assert_eq!(Value::I32(-5).to_string(), "-5");
        assert_eq!(Value::f32(1.0).to_string(), "1.0");
        assert_eq!(Value::F64(CANON_NAN_F64).to_string(), "nan:0x7ff8000000000000");
    }

    #[test]
    fn bits_round_trip() {
        for v in [Value::I32(-1), Value::I64(i64::MIN), Value::F32(CANON_NAN_F32), Value::f64(-0.0)] {
            assert_eq!(Value::from_bits(v.ty(), v.to_bits()), v);
        }
        assert_eq!(Value::I32(-1).to_bits(), 0xFFFF_FFFF);
    }
}
