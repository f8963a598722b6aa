//! Recognition of `env.checked_{type}_{op}` overflow-check imports.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::types::{FuncType, ValType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HookInt {
    I32,
    U32,
    I64,
    U64,
}

impl HookInt {
    /// Wasm type the operands and result are carried in.
    pub fn storage(self) -> ValType {
        match self {
            HookInt::I32 | HookInt::U32 => ValType::I32,
            HookInt::I64 | HookInt::U64 => ValType::I64,
        }
    }

    pub fn signed(self) -> bool {
        matches!(self, HookInt::I32 | HookInt::I64)
    }

    pub fn name(self) -> &'static str {
        match self {
            HookInt::I32 => "i32",
            HookInt::U32 => "u32",
            HookInt::I64 => "i64",
            HookInt::U64 => "u64",
        }
    }

    pub const ALL: [HookInt; 4] = [HookInt::I32, HookInt::U32, HookInt::I64, HookInt::U64];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HookOp {
    Add,
    Sub,
    Mul,
}

impl HookOp {
    pub fn name(self) -> &'static str {
        match self {
            HookOp::Add => "add",
            HookOp::Sub => "sub",
            HookOp::Mul => "mul",
        }
    }

    pub const ALL: [HookOp; 3] = [HookOp::Add, HookOp::Sub, HookOp::Mul];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HookKind {
    pub int_type: HookInt,
    pub op: HookOp,
}

impl HookKind {
    pub fn new(int_type: HookInt, op: HookOp) -> HookKind {
        HookKind { int_type, op }
    }

    pub fn import_name(self) -> String {
        format!("checked_{}_{}", self.int_type.name(), self.op.name())
    }

    pub fn signature(self) -> FuncType {
        let t = self.int_type.storage();
        FuncType::new([t, t], [t])
    }

    /// All twelve supported hooks.
    pub fn all() -> impl Iterator<Item = HookKind> {
        HookInt::ALL
            .into_iter()
            .flat_map(|t| HookOp::ALL.into_iter().map(move |o| HookKind::new(t, o)))
    }
}

impl fmt::Display for HookKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.op.name(), self.int_type.name())
    }
}

/// Name matched the hook grammar but the declared signature is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("hook {0} declared with a mismatched signature")]
pub struct HookSignatureMismatch(pub HookKind);

fn parse_name(name: &str) -> Option<HookKind> {
    let rest = name.strip_prefix("checked_")?;
    let (ty, op) = rest.split_once('_')?;
    let int_type = HookInt::ALL.into_iter().find(|t| t.name() == ty)?;
    let op = HookOp::ALL.into_iter().find(|o| o.name() == op)?;
    Some(HookKind { int_type, op })
}

/// Classifies an import. `Ok(None)` means an ordinary host function.
pub fn recognize_checked_hook(
    import_module: &str,
    import_name: &str,
    signature: &FuncType,
) -> Result<Option<HookKind>, HookSignatureMismatch> {
    if import_module != "env" {
        return Ok(None);
    }
    let Some(kind) = parse_name(import_name) else {
        return Ok(None);
    };
    if *signature != kind.signature() {
        return Err(HookSignatureMismatch(kind));
    }
    Ok(Some(kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ValType::*;

    #[test]
    fn recognizes_listed_hooks() {
        let k = recognize_checked_hook("env", "checked_i32_add", &FuncType::new([I32, I32], [I32]));
        assert_eq!(k, Ok(Some(HookKind::new(HookInt::I32, HookOp::Add))));
        let k = recognize_checked_hook("env", "checked_u64_mul", &FuncType::new([I64, I64], [I64]));
        assert_eq!(k, Ok(Some(HookKind::new(HookInt::U64, HookOp::Mul))));
    }

    #[test]
    fn float_and_foreign_names_are_plain_imports() {
        let sig = FuncType::new([F32, F32], [F32]);
        assert_eq!(recognize_checked_hook("env", "checked_f32_add", &sig), Ok(None));
        let sig = FuncType::new([I32, I32], [I32]);
        assert_eq!(recognize_checked_hook("host", "checked_i32_add", &sig), Ok(None));
        assert_eq!(recognize_checked_hook("env", "checked_i32_div", &sig), Ok(None));
        assert_eq!(recognize_checked_hook("env", "checked_i32_add_x", &sig), Ok(None));
        let u128 = FuncType::new([I64, I64, I64, I64], [I64]);
        assert_eq!(recognize_checked_hook("env", "checked_u128_add", &u128), Ok(None));
    }

    #[test]
    fn signature_mismatch_is_an_error() {
        let sig = FuncType::new([I64, I64], [I64]);
        let e = recognize_checked_hook("env", "checked_u32_sub", &sig).unwrap_err();
        assert_eq!(e.0, HookKind::new(HookInt::U32, HookOp::Sub));
    }

    #[test]
    fn all_twelve_round_trip_through_names() {
        let kinds: Vec<_> = HookKind::all().collect();
        assert_eq!(kinds.len(), 12);
        for k in kinds {
            assert_eq!(recognize_checked_hook("env", &k.import_name(), &k.signature()), Ok(Some(k)));
        }
    }
}
