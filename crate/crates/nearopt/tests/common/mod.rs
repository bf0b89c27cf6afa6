#![allow(dead_code)]

use std::sync::OnceLock;

use nearopt_core::cem::{run_mga, MgaRunConfig, MgaRun, ToyCemInstance};
use nearopt_core::mga::MgaMethod;

pub const SEED: u64 = 7;

pub fn config() -> MgaRunConfig {
    MgaRunConfig { budget_slack: 0.10, iterations: 200, method: MgaMethod::RandomVector, seed: SEED }
}

/// Default desk-scale instance with its 201-row vertex set, built once per test binary.
pub fn toy() -> &'static (ToyCemInstance, MgaRun) {
    static TOY: OnceLock<(ToyCemInstance, MgaRun)> = OnceLock::new();
    TOY.get_or_init(|| {
        let inst = ToyCemInstance::desk_scale(3, 24);
        let run = run_mga(&inst, config()).expect("default instance solves");
        (inst, run)
    })
}
