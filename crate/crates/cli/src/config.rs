//! Run configuration: one TOML file with nested blocks. Every default is
//! spelled out when the effective configuration is echoed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use infodemic_core::ablation::{DEFAULT_R0S, DEFAULT_TAUS, REFERENCE_RUNS};
use infodemic_core::model::{DEFAULT_INITIAL_SPREADERS, DEFAULT_NOISE};
use infodemic_core::{
    CiMethod, EnsembleOptions, HistoryFunction, IntegratorConfig, MergeMode, ModelParams,
    NoiseIntensities, StateVector, SweepSpec, Violation,
};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub initial: InitialBlock,
    pub integrator: IntegratorBlock,
    pub ensemble: EnsembleBlock,
    pub stability: StabilityBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub beta: f64,
    /// When present, replaces `beta` with `r0 (gamma + rho) / population`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub sigma_act: f64,
    pub gamma: f64,
    pub rho: f64,
    pub theta: f64,
    pub tau: f64,
    pub population: f64,
    pub noise: NoiseBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Ig")]
    pub ig: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

/// Constant history: `S = N - exposed - spreaders`, other classes empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub exposed: f64,
    pub spreaders: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorBlock {
    pub step: f64,
    pub horizon: f64,
    pub projection: bool,
    pub record_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethodName {
    Quantile,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeName {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleBlock {
    pub runs: usize,
    /// Base seed shared by every subcommand.
    pub seed: u64,
    pub ci_level: f64,
    pub ci_method: CiMethodName,
    pub merge: MergeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityBlock {
    pub e0: f64,
    pub i0: f64,
    pub runs: usize,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub taus: Vec<f64>,
    pub r0s: Vec<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for ModelBlock {
    fn default() -> Self {
        let p = ModelParams::reference();
        ModelBlock {
            beta: p.beta,
            r0: None,
            sigma_act: p.sigma_act,
            gamma: p.gamma,
            rho: p.rho,
            theta: p.theta,
            tau: p.tau,
            population: p.population,
            noise: NoiseBlock::default(),
        }
    }
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock::from(NoiseIntensities::uniform(DEFAULT_NOISE))
    }
}

impl From<NoiseIntensities> for NoiseBlock {
    fn from(n: NoiseIntensities) -> Self {
        let [s, e, i, r, ig, f] = n.0;
        NoiseBlock { s, e, i, r, ig, f }
    }
}

impl From<NoiseBlock> for NoiseIntensities {
    fn from(n: NoiseBlock) -> Self {
        NoiseIntensities([n.s, n.e, n.i, n.r, n.ig, n.f])
    }
}

impl Default for InitialBlock {
    fn default() -> Self {
        InitialBlock {
            exposed: 0.0,
            spreaders: DEFAULT_INITIAL_SPREADERS,
        }
    }
}

impl Default for IntegratorBlock {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        IntegratorBlock {
            step: c.step,
            horizon: c.horizon,
            projection: c.projection,
            record_stride: c.record_stride,
        }
    }
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        let o = EnsembleOptions::default();
        EnsembleBlock {
            runs: o.run_count,
            seed: o.base_seed,
            ci_level: o.ci_level,
            ci_method: CiMethodName::Quantile,
            merge: MergeName::Sequential,
        }
    }
}

impl Default for StabilityBlock {
    fn default() -> Self {
        StabilityBlock {
            e0: 0.0,
            i0: 0.01,
            runs: 200,
            horizon: 600.0,
        }
    }
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock {
            taus: DEFAULT_TAUS.to_vec(),
            r0s: DEFAULT_R0S.to_vec(),
            runs: REFERENCE_RUNS,
        }
    }
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Replaces `r0` by the `beta` it implies so the echo is self-contained.
    pub fn resolve(mut self) -> Self {
        if let Some(r0) = self.model.r0.take() {
            self.model.beta = r0 * (self.model.gamma + self.model.rho) / self.model.population;
        }
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        let beta = match m.r0 {
            Some(r0) => r0 * (m.gamma + m.rho) / m.population,
            None => m.beta,
        };
        ModelParams {
            beta,
            sigma_act: m.sigma_act,
            gamma: m.gamma,
            rho: m.rho,
            theta: m.theta,
            tau: m.tau,
            noise: m.noise.into(),
            population: m.population,
        }
    }

    pub fn initial_state(&self) -> StateVector {
        let n = self.model.population;
        let (e, i) = (self.initial.exposed, self.initial.spreaders);
        StateVector::new(n - e - i, e, i, 0.0, 0.0, 0.0)
    }

    pub fn history(&self) -> Result<HistoryFunction, CliError> {
        Ok(HistoryFunction::constant(
            self.initial_state(),
            self.model.population,
        )?)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let b = &self.integrator;
        IntegratorConfig::new(b.step, b.horizon)
            .with_projection(b.projection)
            .with_stride(b.record_stride)
    }

    pub fn ensemble_options(&self) -> EnsembleOptions {
        let b = &self.ensemble;
        EnsembleOptions {
            run_count: b.runs,
            base_seed: b.seed,
            ci_level: b.ci_level,
            ci_method: match b.ci_method {
                CiMethodName::Quantile => CiMethod::Quantile,
                CiMethodName::Normal => CiMethod::Normal,
            },
            retain_trajectories: false,
            merge: match b.merge {
                MergeName::Sequential => MergeMode::Sequential,
                MergeName::Parallel => MergeMode::Parallel,
            },
        }
    }

    pub fn stability_integrator(&self) -> IntegratorConfig {
        IntegratorConfig::new(self.integrator.step, self.stability.horizon)
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        let opts = self.ensemble_options();
        SweepSpec {
            taus: self.sweep.taus.clone(),
            r0s: self.sweep.r0s.clone(),
            runs_per_cell: self.sweep.runs,
            base_seed: self.ensemble.seed,
            template: self.params(),
            initial: self.initial_state(),
            integrator: self.integrator(),
            ci_level: opts.ci_level,
            ci_method: opts.ci_method,
        }
    }

    /// Every violated constraint across all blocks.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out: Vec<Violation> = Vec::new();
        let p = self.params();
        if let Some(r0) = self.model.r0 {
            if !(r0.is_finite() && r0 > 0.0) {
                out.push(Violation::new("model.r0", format!("must be positive, got {r0}")));
            }
        }
        out.extend(p.validate().into_iter().map(|v| v.within("model")));

        let n = self.model.population;
        let InitialBlock { exposed, spreaders } = self.initial;
        for (field, v) in [("initial.exposed", exposed), ("initial.spreaders", spreaders)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(field, format!("must be non-negative, got {v}")));
            }
        }
        if n.is_finite() && exposed + spreaders > n {
            out.push(Violation::new(
                "initial",
                format!("exposed + spreaders = {} exceeds the population {n}", exposed + spreaders),
            ));
        }

        let cfg = self.integrator();
        if let Err(e) = cfg.steps() {
            out.extend(with_block(e, "integrator"));
        } else if p.tau.is_finite() && p.tau >= 0.0 {
            if let Err(e) = cfg.delay_steps(p.tau) {
                out.extend(with_block(e, "model"));
            }
            for (k, &tau) in self.sweep.taus.iter().enumerate() {
                if tau.is_finite() && tau >= 0.0 && cfg.delay_steps(tau).is_err() {
                    out.push(Violation::new(
                        format!("sweep.taus[{k}]"),
                        format!("delay {tau} is not a whole number of steps of {}", cfg.step),
                    ));
                }
            }
        }

        let e = &self.ensemble;
        if e.runs == 0 {
            out.push(Violation::new("ensemble.runs", "must be at least 1"));
        }
        if !(e.ci_level > 0.0 && e.ci_level < 1.0) {
            out.push(Violation::new(
                "ensemble.ci_level",
                format!("must lie strictly between 0 and 1, got {}", e.ci_level),
            ));
        }

        let s = &self.stability;
        for (field, v) in [("stability.e0", s.e0), ("stability.i0", s.i0)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(field, format!("must be non-negative, got {v}")));
            }
        }
        if s.e0 + s.i0 <= 0.0 {
            out.push(Violation::new("stability", "e0 and i0 must not both be zero"));
        }
        if s.runs == 0 {
            out.push(Violation::new("stability.runs", "must be at least 1"));
        }
        if let Err(err) = self.stability_integrator().steps() {
            out.extend(with_block(err, "stability"));
        }

        if let Err(err) = self.sweep_spec().validate() {
            out.extend(err.violations().iter().cloned());
        }
        out
    }
}

fn with_block(e: infodemic_core::Error, block: &str) -> Vec<Violation> {
    match e {
        infodemic_core::Error::Invalid(v) => v.into_iter().map(|v| v.within(block)).collect(),
        other => vec![Violation::new(block, other.to_string())],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert!(c.validate().is_empty());
        assert_eq!(c.params(), ModelParams::reference());
    }

    #[test]
    fn r0_resolves_to_beta() {
        let c = RunConfig::from_toml("[model]\nr0 = 2.0\n").unwrap();
        assert!((c.params().beta - 0.3).abs() < 1e-15);
        let resolved = c.resolve();
        assert_eq!(resolved.model.r0, None);
        assert!((resolved.model.beta - 0.3).abs() < 1e-15);
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_toml("[model]\nr0 = 1.2\ntau = 5\n[ensemble]\nruns = 7\n")
            .unwrap()
            .resolve();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        let text = c.to_toml();
        for key in ["sigma_act", "theta", "population", "Ig", "ci_method", "record_stride"] {
            assert!(text.contains(key), "{key} missing from echo");
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let c = RunConfig::from_toml(
            "[model]\nbeta = -0.1\ngamma = 0\n[ensemble]\nruns = 0\nci_level = 1.5\n",
        )
        .unwrap();
        let fields: Vec<String> = c.validate().into_iter().map(|v| v.field).collect();
        for f in ["model.beta", "model.gamma", "ensemble.runs", "ensemble.ci_level"] {
            assert!(fields.iter().any(|x| x == f), "{f} not in {fields:?}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nbetta = 0.3\n").is_err());
    }

    #[test]
    fn off_grid_delay_is_reported() {
        let c = RunConfig::from_toml("[model]\ntau = 0.25\n").unwrap();
        assert!(c.validate().iter().any(|v| v.field.starts_with("model")));
    }
}
