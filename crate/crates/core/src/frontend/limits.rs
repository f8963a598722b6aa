use serde::{Deserialize, Serialize};

/// Static determinism limits enforced during validation.
///
/// The first five defaults are the fixed dWasm values; memory, table and
/// import/export caps are deployment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwasmLimits {
    pub max_params: u32,
    pub max_locals: u32,
    pub max_frame_weight: u64,
    pub max_instructions_per_function: u32,
    pub max_control_nesting: u32,
    pub max_memory_pages: u32,
    pub max_table_entries: u32,
    pub max_imports: u32,
    pub max_exports: u32,
    /// Reject every float type and float operator instead of canonicalizing NaNs.
    pub reject_floats: bool,
}

impl Default for DwasmLimits {
    fn default() -> Self {
        DwasmLimits {
            max_params: 1024,
            max_locals: 10240,
            max_frame_weight: 40960,
            max_instructions_per_function: 10240,
            max_control_nesting: 1024,
            max_memory_pages: 65536,
            max_table_entries: 65536,
            max_imports: 1024,
            max_exports: 1024,
            reject_floats: false,
        }
    }
}

impl DwasmLimits {
    /// Every limit must be strictly positive.
    pub fn check(&self) -> Result<(), String> {
        let fields = [
            ("max_params", self.max_params as u64),
            ("max_locals", self.max_locals as u64),
            ("max_frame_weight", self.max_frame_weight),
            ("max_instructions_per_function", self.max_instructions_per_function as u64),
            ("max_control_nesting", self.max_control_nesting as u64),
            ("max_memory_pages", self.max_memory_pages as u64),
            ("max_table_entries", self.max_table_entries as u64),
            ("max_imports", self.max_imports as u64),
            ("max_exports", self.max_exports as u64),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.max_memory_pages > 65536 {
            return Err("max_memory_pages cannot exceed 65536".into());
        }
        Ok(())
    }
}
