//! Reference semantics of dMIR operators over raw 64-bit register bits.
//! 32-bit values live in the low half, zero-extended.

use crate::dmir::hooks::{HookInt, HookKind, HookOp};
use crate::frontend::ops::{LoadOp, NumOp, StoreOp};
use crate::frontend::types::ValType;
use crate::runtime::trap::TrapCode;
use crate::runtime::value::{CANON_NAN_F32, CANON_NAN_F64};

#[inline]
fn f32_of(b: u64) -> f32 {
    f32::from_bits(b as u32)
}

#[inline]
fn f64_of(b: u64) -> f64 {
    f64::from_bits(b)
}

#[inline]
fn from_f32(x: f32) -> u64 {
    x.to_bits() as u64
}

#[inline]
fn from_f64(x: f64) -> u64 {
    x.to_bits()
}

#[inline]
fn i32v(v: i32) -> u64 {
    v as u32 as u64
}

#[inline]
fn bool32(b: bool) -> u64 {
    b as u64
}

pub fn canon(ty: ValType, bits: u64) -> u64 {
    match ty {
        ValType::F32 if f32_of(bits).is_nan() => CANON_NAN_F32 as u64,
        ValType::F64 if f64_of(bits).is_nan() => CANON_NAN_F64,
        _ => bits,
    }
}

fn fmin32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        // -0 vs +0: prefer the negative zero
        f32::from_bits(a.to_bits() | b.to_bits())
    } else if a < b {
        a
    } else {
        b
    }
}

fn fmax32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a == b {
        f32::from_bits(a.to_bits() & b.to_bits())
    } else if a > b {
        a
    } else {
        b
    }
}

fn fmin64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        f64::from_bits(a.to_bits() | b.to_bits())
    } else if a < b {
        a
    } else {
        b
    }
}

fn fmax64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a == b {
        f64::from_bits(a.to_bits() & b.to_bits())
    } else if a > b {
        a
    } else {
        b
    }
}

/// Range checks for float-to-int truncation. Bounds are exclusive and
/// exactly representable in the source type.
pub(crate) fn trunc_in_range(op: NumOp, x: f64) -> bool {
    use NumOp::*;
    if x.is_nan() {
        return false;
    }
    match op {
        I32TruncF32S => (-2147483648.0..2147483648.0).contains(&x),
        I32TruncF64S => x > -2147483649.0 && x < 2147483648.0,
        I32TruncF32U | I32TruncF64U => x > -1.0 && x < 4294967296.0,
        I64TruncF32S | I64TruncF64S => (-9223372036854775808.0..9223372036854775808.0).contains(&x),
        I64TruncF32U | I64TruncF64U => x > -1.0 && x < 18446744073709551616.0,
        _ => unreachable!("not a truncation"),
    }
}

pub fn eval_unary(op: NumOp, a: u64) -> Result<u64, TrapCode> {
    use NumOp::*;
    let a32 = a as u32;
    Ok(match op {
        I32Eqz => bool32(a32 == 0),
        I64Eqz => bool32(a == 0),
        I32Clz => a32.leading_zeros() as u64,
        I32Ctz => a32.trailing_zeros() as u64,
        I32Popcnt => a32.count_ones() as u64,
        I64Clz => a.leading_zeros() as u64,
        I64Ctz => a.trailing_zeros() as u64,
        I64Popcnt => a.count_ones() as u64,
        F32Abs => (a32 & 0x7FFF_FFFF) as u64,
        F32Neg => (a32 ^ 0x8000_0000) as u64,
        F32Ceil => from_f32(f32_of(a).ceil()),
        F32Floor => from_f32(f32_of(a).floor()),
        F32Trunc => from_f32(f32_of(a).trunc()),
        F32Nearest => from_f32(f32_of(a).round_ties_even()),
        F32Sqrt => from_f32(f32_of(a).sqrt()),
        F64Abs => a & 0x7FFF_FFFF_FFFF_FFFF,
        F64Neg => a ^ 0x8000_0000_0000_0000,
        F64Ceil => from_f64(f64_of(a).ceil()),
        F64Floor => from_f64(f64_of(a).floor()),
        F64Trunc => from_f64(f64_of(a).trunc()),
        F64Nearest => from_f64(f64_of(a).round_ties_even()),
        F64Sqrt => from_f64(f64_of(a).sqrt()),
        I32WrapI64 => a & 0xFFFF_FFFF,
        I32TruncF32S | I32TruncF32U | I64TruncF32S | I64TruncF32U => {
            let x = f32_of(a) as f64;
            if !trunc_in_range(op, x) {
                return Err(TrapCode::InvalidConversionToInteger);
            }
            match op {
                I32TruncF32S => i32v(x as i32),
                I32TruncF32U => x as u32 as u64,
                I64TruncF32S => x as i64 as u64,
                _ => x as u64,
            }
        }
        I32TruncF64S | I32TruncF64U | I64TruncF64S | I64TruncF64U => {
            let x = f64_of(a);
            if !trunc_in_range(op, x) {
                return Err(TrapCode::InvalidConversionToInteger);
            }
            match op {
                I32TruncF64S => i32v(x as i32),
                I32TruncF64U => x as u32 as u64,
                I64TruncF64S => x as i64 as u64,
                _ => x as u64,
            }
        }
        I64ExtendI32S => a32 as i32 as i64 as u64,
        I64ExtendI32U => a32 as u64,
        F32ConvertI32S => from_f32(a32 as i32 as f32),
        F32ConvertI32U => from_f32(a32 as f32),
        F32ConvertI64S => from_f32(a as i64 as f32),
        F32ConvertI64U => from_f32(a as f32),
        F32DemoteF64 => from_f32(f64_of(a) as f32),
        F64ConvertI32S => from_f64(a32 as i32 as f64),
        F64ConvertI32U => from_f64(a32 as f64),
        F64ConvertI64S => from_f64(a as i64 as f64),
        F64ConvertI64U => from_f64(a as f64),
        F64PromoteF32 => from_f64(f32_of(a) as f64),
        I32ReinterpretF32 | F32ReinterpretI32 => a & 0xFFFF_FFFF,
        I64ReinterpretF64 | F64ReinterpretI64 => a,
        _ => unreachable!("{} is not unary", op.name()),
    })
}

pub fn eval_binary(op: NumOp, a: u64, b: u64) -> Result<u64, TrapCode> {
    use NumOp::*;
    let (a32, b32) = (a as u32, b as u32);
    let (sa32, sb32) = (a32 as i32, b32 as i32);
    let (sa, sb) = (a as i64, b as i64);
    let (fa, fb) = (f32_of(a), f32_of(b));
    let (da, db) = (f64_of(a), f64_of(b));
    Ok(match op {
        I32Eq => bool32(a32 == b32),
        I32Ne => bool32(a32 != b32),
        I32LtS => bool32(sa32 < sb32),
        I32LtU => bool32(a32 < b32),
        I32GtS => bool32(sa32 > sb32),
        I32GtU => bool32(a32 > b32),
        I32LeS => bool32(sa32 <= sb32),
        I32LeU => bool32(a32 <= b32),
        I32GeS => bool32(sa32 >= sb32),
        I32GeU => bool32(a32 >= b32),
        I64Eq => bool32(a == b),
        I64Ne => bool32(a != b),
        I64LtS => bool32(sa < sb),
        I64LtU => bool32(a < b),
        I64GtS => bool32(sa > sb),
        I64GtU => bool32(a > b),
        I64LeS => bool32(sa <= sb),
        I64LeU => bool32(a <= b),
        I64GeS => bool32(sa >= sb),
        I64GeU => bool32(a >= b),
        F32Eq => bool32(fa == fb),
        F32Ne => bool32(fa != fb),
        F32Lt => bool32(fa < fb),
        F32Gt => bool32(fa > fb),
        F32Le => bool32(fa <= fb),
        F32Ge => bool32(fa >= fb),
        F64Eq => bool32(da == db),
        F64Ne => bool32(da != db),
        F64Lt => bool32(da < db),
        F64Gt => bool32(da > db),
        F64Le => bool32(da <= db),
        F64Ge => bool32(da >= db),
        I32Add => a32.wrapping_add(b32) as u64,
        I32Sub => a32.wrapping_sub(b32) as u64,
        I32Mul => a32.wrapping_mul(b32) as u64,
        I32DivS => {
            if b32 == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            if sa32 == i32::MIN && sb32 == -1 {
                return Err(TrapCode::IntegerOverflow);
            }
            i32v(sa32 / sb32)
        }
        I32DivU => {
            if b32 == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            (a32 / b32) as u64
        }
        I32RemS => {
            if b32 == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            i32v(sa32.wrapping_rem(sb32))
        }
        I32RemU => {
            if b32 == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            (a32 % b32) as u64
        }
        I32And => (a32 & b32) as u64,
        I32Or => (a32 | b32) as u64,
        I32Xor => (a32 ^ b32) as u64,
        I32Shl => a32.wrapping_shl(b32) as u64,
        I32ShrS => i32v(sa32.wrapping_shr(b32)),
        I32ShrU => a32.wrapping_shr(b32) as u64,
        I32Rotl => a32.rotate_left(b32 & 31) as u64,
        I32Rotr => a32.rotate_right(b32 & 31) as u64,
        I64Add => a.wrapping_add(b),
        I64Sub => a.wrapping_sub(b),
        I64Mul => a.wrapping_mul(b),
        I64DivS => {
            if b == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            if sa == i64::MIN && sb == -1 {
                return Err(TrapCode::IntegerOverflow);
            }
            (sa / sb) as u64
        }
        I64DivU => {
            if b == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            a / b
        }
        I64RemS => {
            if b == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            sa.wrapping_rem(sb) as u64
        }
        I64RemU => {
            if b == 0 {
                return Err(TrapCode::IntegerDivideByZero);
            }
            a % b
        }
        I64And => a & b,
        I64Or => a | b,
        I64Xor => a ^ b,
        I64Shl => a.wrapping_shl(b as u32),
        I64ShrS => sa.wrapping_shr(b as u32) as u64,
        I64ShrU => a.wrapping_shr(b as u32),
        I64Rotl => a.rotate_left((b & 63) as u32),
        I64Rotr => a.rotate_right((b & 63) as u32),
        F32Add => from_f32(fa + fb),
        F32Sub => from_f32(fa - fb),
        F32Mul => from_f32(fa * fb),
        F32Div => from_f32(fa / fb),
        F32Min => from_f32(fmin32(fa, fb)),
        F32Max => from_f32(fmax32(fa, fb)),
        F32Copysign => ((a32 & 0x7FFF_FFFF) | (b32 & 0x8000_0000)) as u64,
        F64Add => from_f64(da + db),
        F64Sub => from_f64(da - db),
        F64Mul => from_f64(da * db),
        F64Div => from_f64(da / db),
        F64Min => from_f64(fmin64(da, db)),
        F64Max => from_f64(fmax64(da, db)),
        F64Copysign => (a & 0x7FFF_FFFF_FFFF_FFFF) | (b & 0x8000_0000_0000_0000),
        _ => unreachable!("{} is not binary", op.name()),
    })
}

/// Exact result of a checked hook, or the overflow trap.
pub fn eval_checked(hook: HookKind, a: u64, b: u64) -> Result<u64, TrapCode> {
    let ovf = TrapCode::CheckedArithmeticOverflow;
    let r = match hook.int_type {
        HookInt::I32 => {
            let (x, y) = (a as u32 as i32, b as u32 as i32);
            match hook.op {
                HookOp::Add => x.checked_add(y),
                HookOp::Sub => x.checked_sub(y),
                HookOp::Mul => x.checked_mul(y),
            }
            .map(i32v)
        }
        HookInt::U32 => {
            let (x, y) = (a as u32, b as u32);
            match hook.op {
                HookOp::Add => x.checked_add(y),
                HookOp::Sub => x.checked_sub(y),
                HookOp::Mul => x.checked_mul(y),
            }
            .map(|v| v as u64)
        }
        HookInt::I64 => {
            let (x, y) = (a as i64, b as i64);
            match hook.op {
                HookOp::Add => x.checked_add(y),
                HookOp::Sub => x.checked_sub(y),
                HookOp::Mul => x.checked_mul(y),
            }
            .map(|v| v as u64)
        }
        HookInt::U64 => match hook.op {
            HookOp::Add => a.checked_add(b),
            HookOp::Sub => a.checked_sub(b),
            HookOp::Mul => a.checked_mul(b),
        },
    };
    r.ok_or(ovf)
}

/// Extend loaded little-endian bytes to register bits.
pub fn load_extend(op: LoadOp, raw: u64) -> u64 {
    use LoadOp::*;
    match op {
        I32 | F32 | I64_32U => raw & 0xFFFF_FFFF,
        I64 | F64 => raw,
        I32_8S => i32v(raw as u8 as i8 as i32),
        I32_8U | I64_8U => raw & 0xFF,
        I32_16S => i32v(raw as u16 as i16 as i32),
        I32_16U | I64_16U => raw & 0xFFFF,
        I64_8S => raw as u8 as i8 as i64 as u64,
        I64_16S => raw as u16 as i16 as i64 as u64,
        I64_32S => raw as u32 as i32 as i64 as u64,
    }
}

pub fn store_width(op: StoreOp) -> u32 {
    op.width()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_traps() {
        assert_eq!(eval_binary(NumOp::I32DivS, 1, 0), Err(TrapCode::IntegerDivideByZero));
        assert_eq!(
            eval_binary(NumOp::I32DivS, i32v(i32::MIN), i32v(-1)),
            Err(TrapCode::IntegerOverflow)
        );
        assert_eq!(eval_binary(NumOp::I32RemS, i32v(i32::MIN), i32v(-1)), Ok(0));
        assert_eq!(eval_binary(NumOp::I64RemU, 7, 0), Err(TrapCode::IntegerDivideByZero));
        assert_eq!(eval_binary(NumOp::I32DivS, i32v(-7), 2), Ok(i32v(-3)));
    }

    #[test]
    fn truncation_bounds() {
        let t = |op, x: f64| eval_unary(op, from_f64(x));
        assert_eq!(t(NumOp::I32TruncF64S, -2147483648.9), Ok(i32v(i32::MIN)));
        assert!(t(NumOp::I32TruncF64S, -2147483649.0).is_err());
        assert!(t(NumOp::I32TruncF64S, 2147483648.0).is_err());
        assert_eq!(t(NumOp::I32TruncF64U, -0.9), Ok(0));
        assert!(t(NumOp::I32TruncF64U, -1.0).is_err());
        assert!(t(NumOp::I64TruncF64U, f64::NAN).is_err());
        let tf = |op, x: f32| eval_unary(op, from_f32(x));
        assert!(tf(NumOp::I32TruncF32S, 2147483648.0).is_err());
        assert_eq!(tf(NumOp::I32TruncF32S, -2147483648.0), Ok(i32v(i32::MIN)));
        assert_eq!(tf(NumOp::I64TruncF32U, 1.5), Ok(1));
    }

    #[test]
    fn min_max_zero_signs() {
        let neg0 = from_f32(-0.0);
        let pos0 = from_f32(0.0);
        assert_eq!(eval_binary(NumOp::F32Min, pos0, neg0), Ok(neg0));
        assert_eq!(eval_binary(NumOp::F32Max, neg0, pos0), Ok(pos0));
        let nan = eval_binary(NumOp::F64Min, from_f64(1.0), from_f64(f64::NAN)).unwrap();
        assert!(f64_of(nan).is_nan());
    }

    #[test]
    fn canonical_nan() {
        let div = eval_binary(NumOp::F32Div, from_f32(0.0), from_f32(0.0)).unwrap();
        assert_eq!(canon(ValType::F32, div), CANON_NAN_F32 as u64);
        assert_eq!(canon(ValType::F64, 0xFFF0_0000_0000_0001), CANON_NAN_F64);
        assert_eq!(canon(ValType::F64, from_f64(1.0)), from_f64(1.0));
    }

    #[test]
    fn shifts_and_rotates() {
        assert_eq!(eval_binary(NumOp::I32Shl, 1, 33), Ok(2));
        assert_eq!(eval_binary(NumOp::I32ShrS, i32v(-8), 1), Ok(i32v(-4)));
        assert_eq!(eval_binary(NumOp::I32Rotl, 0x8000_0001, 1), Ok(3));
        assert_eq!(eval_binary(NumOp::I64Rotr, 1, 65), Ok(1 << 63));
    }

    #[test]
    fn checked_hooks() {
        let k = |t, o| HookKind::new(t, o);
        assert_eq!(
            eval_checked(k(HookInt::I32, HookOp::Add), i32v(i32::MAX), 1),
            Err(TrapCode::CheckedArithmeticOverflow)
        );
        assert_eq!(eval_checked(k(HookInt::I32, HookOp::Add), 1, 2), Ok(3));
        assert!(eval_checked(k(HookInt::U64, HookOp::Mul), 1 << 32, 1 << 32).is_err());
        assert!(eval_checked(k(HookInt::I32, HookOp::Sub), i32v(i32::MIN), 1).is_err());
        assert!(eval_checked(k(HookInt::U32, HookOp::Sub), 0, 1).is_err());
    }

    #[test]
    fn load_extension() {
        assert_eq!(load_extend(LoadOp::I32_8S, 0xFF), 0xFFFF_FFFF);
        assert_eq!(load_extend(LoadOp::I64_16S, 0x8000), 0xFFFF_FFFF_FFFF_8000);
        assert_eq!(load_extend(LoadOp::I64_32U, 0xFFFF_FFFF), 0xFFFF_FFFF);
    }
}
