//! Stochastic delayed rumor-propagation model with six compartments:
//! susceptible, exposed, spreading, removed, skeptical and fact-checked.
//!
//! The crate provides an Euler–Maruyama integrator with a delay buffer,
//! reproducible parallel ensembles, stability and moment-bound checks, and
//! a parameter sweep that can be compared against a published reference
//! table.

pub mod ablation;
pub mod bounds;
pub mod engine;
pub mod ensemble;
pub mod error;
pub mod export;
pub mod model;
pub mod noise;
pub mod stability;

pub use ablation::{
    compare_to_reference, run_sweep, DeviationReport, ReferenceTable, SweepCell, SweepResult,
    SweepSpec,
};
pub use engine::{integrate, IntegratorConfig, Trajectory};
pub use ensemble::{
    run_ensemble, CiMethod, EnsembleOptions, EnsembleOutput, EnsembleSummary, MergeMode,
    OutbreakMetrics,
};
pub use error::{Error, Result, Violation};
pub use model::{
    drift, diffusion, reproduction_number, stochastic_margin, Compartment, HistoryFunction,
    ModelParams, NoiseIntensities, StateVector, Vector6,
};
pub use stability::{
    classify_equilibrium, final_size, simulate_linearized, EquilibriumClass,
    MeanSquareDecayReport, Verdict,
};
