//! Block-entry gas metering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dmir::ir::{Block, DmirFunction, Inst};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub default_cost: u32,
    /// Added once per `call` / `call_indirect`.
    pub call_overhead: u32,
    /// Per-mnemonic overrides (`add`, `load`, `call`, ...).
    pub overrides: BTreeMap<String, u32>,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            default_cost: 1,
            call_overhead: 2,
            overrides: BTreeMap::new(),
        }
    }
}

impl CostModel {
    pub fn cost(&self, inst: &Inst) -> u64 {
        if let Inst::GasCharge(_) = inst {
            return 0;
        }
        let base = *self.overrides.get(&inst.mnemonic()).unwrap_or(&self.default_cost) as u64;
        if inst.is_call() {
            base + self.call_overhead as u64
        } else {
            base
        }
    }

    /// Cost of an explicit `br`, `br_if` or `br_table`.
    pub fn branch_cost(&self) -> u64 {
        *self.overrides.get("br").unwrap_or(&self.default_cost) as u64
    }

    /// Summed cost of a block's instructions, plus the branch opcode that
    /// ends it if any. Structural terminators are free.
    pub fn block_cost(&self, block: &Block) -> u64 {
        let term = if block.explicit_branch { self.branch_cost() } else { 0 };
        block.insts.iter().map(|i| self.cost(i)).sum::<u64>() + term
    }
}

/// Prepend `gas_charge(C)` to every block whose cost C is positive.
pub fn insert_gas_metering(f: &mut DmirFunction, cost: &CostModel) {
    assert!(!f.has_gas_charges(), "function is already metered");
    for block in &mut f.blocks {
        let c = cost.block_cost(block);
        if c > 0 {
            block.insts.insert(0, Inst::GasCharge(c));
        }
    }
}
