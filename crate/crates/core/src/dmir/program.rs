use crate::dmir::ir::DmirFunction;
use crate::dmir::lower::lower_to_dmir;
use crate::dmir::meter::{insert_gas_metering, CostModel};
use crate::dmir::passes::{run_passes, Pass};
use crate::frontend::{load, DwasmLimits, ValidatedModule, ValidationError};

/// A validated module with every defined function lowered and metered.
/// Building one is the determinism gate: nothing executes before it exists.
#[derive(Debug, Clone)]
pub struct Program {
    module: ValidatedModule,
    funcs: Vec<DmirFunction>,
    cost: CostModel,
}

impl Program {
    pub fn new(module: ValidatedModule, cost: CostModel) -> Program {
        let funcs = (module.num_imported_funcs..module.total_funcs())
            .map(|i| {
                let mut f = lower_to_dmir(&module, i);
                insert_gas_metering(&mut f, &cost);
                f
            })
            .collect();
        Program { module, funcs, cost }
    }

    pub fn from_bytes(bytes: &[u8], limits: &DwasmLimits) -> Result<Program, ValidationError> {
        Ok(Program::new(load(bytes, limits)?, CostModel::default()))
    }

    pub fn module(&self) -> &ValidatedModule {
        &self.module
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    /// Metered, unoptimized dMIR of a defined function.
    pub fn func(&self, func_index: u32) -> &DmirFunction {
        &self.funcs[(func_index - self.module.num_imported_funcs) as usize]
    }

    pub fn funcs(&self) -> &[DmirFunction] {
        &self.funcs
    }

    /// Metered dMIR after the full pass list.
    pub fn optimized(&self, func_index: u32) -> DmirFunction {
        let mut f = self.func(func_index).clone();
        run_passes(&mut f, &Pass::ALL);
        f
    }

    /// The same program with `passes` applied to every function.
    pub fn with_passes(mut self, passes: &[Pass]) -> Program {
        for f in &mut self.funcs {
            run_passes(f, passes);
        }
        self
    }

    pub fn export(&self, name: &str) -> Option<u32> {
        self.module.export_func(name)
    }
}
