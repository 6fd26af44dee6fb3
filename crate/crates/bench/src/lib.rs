//! Shared fixtures for the criterion benchmarks.

use infodemic_core::{HistoryFunction, IntegratorConfig, ModelParams};

/// Reference parameters at the given delay and reproduction number.
pub fn params(tau: f64, r0: f64) -> ModelParams {
    ModelParams::reference().with_tau(tau).with_r0(r0)
}

pub fn history(p: &ModelParams) -> HistoryFunction {
    HistoryFunction::default_for(p).expect("valid reference parameters")
}

/// Default step on a horizon of `horizon` time units.
pub fn integrator(horizon: f64) -> IntegratorConfig {
    IntegratorConfig::new(0.1, horizon)
}
