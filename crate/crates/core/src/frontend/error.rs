use std::fmt;

use serde::{Deserialize, Serialize};

/// Rejection reason. The `(code, offset)` pair is the deterministic part of a
/// [`ValidationError`]; `detail` is informational only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValidationCode {
    MalformedModule,
    ParamCountExceeded,
    LocalCountExceeded,
    FrameWeightExceeded,
    InstructionCountExceeded,
    NestingDepthExceeded,
    InvalidUtf8Identifier,
    UnsupportedFeature,
    TypeMismatch,
    UnknownIndex,
    HookSignatureMismatch,
    DuplicateExport,
    ImmutableGlobal,
    InvalidAlignment,
    InvalidConstExpr,
    InvalidStartFunction,
    MemoryLimitExceeded,
    TableLimitExceeded,
    ImportCountExceeded,
    ExportCountExceeded,
}

impl ValidationCode {
    pub fn as_str(self) -> &'static str {
        use ValidationCode::*;
        match self {
            MalformedModule => "MalformedModule",
            ParamCountExceeded => "ParamCountExceeded",
            LocalCountExceeded => "LocalCountExceeded",
            FrameWeightExceeded => "FrameWeightExceeded",
            InstructionCountExceeded => "InstructionCountExceeded",
            NestingDepthExceeded => "NestingDepthExceeded",
            InvalidUtf8Identifier => "InvalidUtf8Identifier",
            UnsupportedFeature => "UnsupportedFeature",
            TypeMismatch => "TypeMismatch",
            UnknownIndex => "UnknownIndex",
            HookSignatureMismatch => "HookSignatureMismatch",
            DuplicateExport => "DuplicateExport",
            ImmutableGlobal => "ImmutableGlobal",
            InvalidAlignment => "InvalidAlignment",
            InvalidConstExpr => "InvalidConstExpr",
            InvalidStartFunction => "InvalidStartFunction",
            MemoryLimitExceeded => "MemoryLimitExceeded",
            TableLimitExceeded => "TableLimitExceeded",
            ImportCountExceeded => "ImportCountExceeded",
            ExportCountExceeded => "ExportCountExceeded",
        }
    }
}

impl fmt::Display for ValidationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("EVALID {code} offset={offset}")]
pub struct ValidationError {
    pub code: ValidationCode,
    pub offset: u32,
    pub detail: String,
}

impl ValidationError {
    pub fn new(code: ValidationCode, offset: u32, detail: impl Into<String>) -> ValidationError {
        ValidationError {
            code,
            offset,
            detail: detail.into(),
        }
    }

    pub fn malformed(offset: u32, detail: impl Into<String>) -> ValidationError {
        ValidationError::new(ValidationCode::MalformedModule, offset, detail)
    }

    /// The one-line deterministic rendering used by the CLI.
    pub fn line(&self) -> String {
        format!("EVALID {} offset={}", self.code, self.offset)
    }
}
