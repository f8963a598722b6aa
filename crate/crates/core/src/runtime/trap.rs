use std::fmt;

use serde::{Deserialize, Serialize};

/// Closed set of abnormal-termination codes. The numeric values are the
/// ones generated code stores into the instance context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u32)]
pub enum TrapCode {
    Unreachable = 1,
    MemoryAccessOutOfBounds = 2,
    IntegerDivideByZero = 3,
    IntegerOverflow = 4,
    InvalidConversionToInteger = 5,
    IndirectCallTypeMismatch = 6,
    UndefinedTableElement = 7,
    WasmCallStackExceed = 8,
    GasExhausted = 9,
    CheckedArithmeticOverflow = 10,
    HostError = 11,
}

impl TrapCode {
    pub const ALL: [TrapCode; 11] = [
        TrapCode::Unreachable,
        TrapCode::MemoryAccessOutOfBounds,
        TrapCode::IntegerDivideByZero,
        TrapCode::IntegerOverflow,
        TrapCode::InvalidConversionToInteger,
        TrapCode::IndirectCallTypeMismatch,
        TrapCode::UndefinedTableElement,
        TrapCode::WasmCallStackExceed,
        TrapCode::GasExhausted,
        TrapCode::CheckedArithmeticOverflow,
        TrapCode::HostError,
    ];

    pub fn from_u32(v: u32) -> Option<TrapCode> {
        TrapCode::ALL.into_iter().find(|c| *c as u32 == v)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrapCode::Unreachable => "Unreachable",
            TrapCode::MemoryAccessOutOfBounds => "MemoryAccessOutOfBounds",
            TrapCode::IntegerDivideByZero => "IntegerDivideByZero",
            TrapCode::IntegerOverflow => "IntegerOverflow",
            TrapCode::InvalidConversionToInteger => "InvalidConversionToInteger",
            TrapCode::IndirectCallTypeMismatch => "IndirectCallTypeMismatch",
            TrapCode::UndefinedTableElement => "UndefinedTableElement",
            TrapCode::WasmCallStackExceed => "WasmCallStackExceed",
            TrapCode::GasExhausted => "GasExhausted",
            TrapCode::CheckedArithmeticOverflow => "CheckedArithmeticOverflow",
            TrapCode::HostError => "HostError",
        }
    }
}

impl fmt::Display for TrapCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trap as observed by the embedder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trap {
    pub code: TrapCode,
    pub gas_consumed: u64,
    /// Faulting memory offset, or call depth for stack traps.
    pub detail: Option<u64>,
}

impl fmt::Display for Trap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TRAP {} gas={}", self.code, self.gas_consumed)
    }
}

impl std::error::Error for Trap {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for c in TrapCode::ALL {
            assert_eq!(TrapCode::from_u32(c as u32), Some(c));
        }
        assert_eq!(TrapCode::from_u32(0), None);
        assert_eq!(TrapCode::from_u32(12), None);
    }
}
