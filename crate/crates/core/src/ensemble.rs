//! Monte Carlo ensembles: pointwise summary bands and per-run outbreak metrics.
//!
//! Runs are integrated concurrently and collected in run order. Pointwise
//! moments are Welford accumulators whose `merge` is Chan's pairwise update,
//! so they can also be combined in any grouping ([`MergeMode::Parallel`]);
//! [`MergeMode::Sequential`] folds them in run order for bit-exact output.

use log::warn;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{integrate, IntegratorConfig, Trajectory};
use crate::error::{Error, Result};
use crate::model::{HistoryFunction, ModelParams, Vector6, COMPARTMENTS};
use crate::noise::derive_seed;

/// Terminal spreader mass (relative to `N`) below which the outbreak counts
/// as extinguished.
pub const EXTINCTION_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CiMethod {
    /// Empirical quantiles with linear interpolation between order statistics.
    #[default]
    Quantile,
    /// `mean +/- z * std` with `z` the standard normal quantile.
    Normal,
}

/// Pointwise band `(lower, upper)` at the given level.
pub fn confidence_band(values: &[f64], level: f64, method: CiMethod) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let alpha = (1.0 - level) / 2.0;
    match method {
        CiMethod::Quantile => {
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            Ok((
                sorted_quantile(&sorted, alpha),
                sorted_quantile(&sorted, 1.0 - alpha),
            ))
        }
        CiMethod::Normal => {
            let (mean, std) = mean_std(values);
            let z = normal_quantile(1.0 - alpha);
            Ok((mean - z * std, mean + z * std))
        }
    }
}

/// Quantile of already sorted data, interpolating at position `q (n - 1)`.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for `n < 2`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Order-independent mean/std: the values are sorted before summation, so
/// any permutation of the runs gives bit-identical results.
fn sorted_mean_std(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    mean_std(&sorted)
}

/// Running per-point, per-compartment moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseMoments {
    count: usize,
    mean: Vec<Vector6>,
    m2: Vec<Vector6>,
}

impl PointwiseMoments {
    pub fn new(points: usize) -> Self {
        Self {
            count: 0,
            mean: vec![[0.0; COMPARTMENTS]; points],
            m2: vec![[0.0; COMPARTMENTS]; points],
        }
    }

    pub fn from_trajectory(t: &Trajectory) -> Self {
        let mut m = Self::new(t.len());
        m.push(t);
        m
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, t: &Trajectory) {
        assert_eq!(t.len(), self.mean.len(), "trajectory grid mismatch");
        self.count += 1;
        let n = self.count as f64;
        for (j, state) in t.states.iter().enumerate() {
            for k in 0..COMPARTMENTS {
                let x = state.0[k];
                let delta = x - self.mean[j][k];
                self.mean[j][k] += delta / n;
                self.m2[j][k] += delta * (x - self.mean[j][k]);
            }
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(mut self, other: PointwiseMoments) -> PointwiseMoments {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        assert_eq!(self.mean.len(), other.mean.len(), "grid mismatch");
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for j in 0..self.mean.len() {
            for k in 0..COMPARTMENTS {
                let delta = other.mean[j][k] - self.mean[j][k];
                self.mean[j][k] += delta * nb / n;
                self.m2[j][k] += other.m2[j][k] + delta * delta * na * nb / n;
            }
        }
        self.count += other.count;
        self
    }

    pub fn mean(&self) -> &[Vector6] {
        &self.mean
    }

    /// Sample standard deviation per point, `None` below two runs.
    pub fn std(&self) -> Option<Vec<Vector6>> {
        if self.count < 2 {
            return None;
        }
        let denom = (self.count - 1) as f64;
        Some(
            self.m2
                .iter()
                .map(|row| row.map(|v| (v.max(0.0) / denom).sqrt()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Fold per-run statistics in run order; bit-exact across schedules.
    #[default]
    Sequential,
    /// Tree-reduce per-run statistics; equal up to floating-point reassociation.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptions {
    pub run_count: usize,
    pub base_seed: u64,
    pub ci_level: f64,
    pub ci_method: CiMethod,
    pub retain_trajectories: bool,
    pub merge: MergeMode,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            run_count: 100,
            base_seed: 42,
            ci_level: 0.95,
            ci_method: CiMethod::Quantile,
            retain_trajectories: false,
            merge: MergeMode::Sequential,
        }
    }
}

impl EnsembleOptions {
    pub fn runs(mut self, run_count: usize) -> Self {
        self.run_count = run_count;
        self
    }

    pub fn seed(mut self, base_seed: u64) -> Self {
        self.base_seed = base_seed;
        self
    }
}

/// Pointwise spread, defined only for two or more runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Spread {
    pub std: Vec<Vector6>,
    pub lower: Vec<Vector6>,
    pub upper: Vec<Vector6>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<Vector6>,
    pub spread: Option<Spread>,
    pub ci_level: f64,
    pub ci_method: CiMethod,
    pub run_count: usize,
}

impl EnsembleSummary {
    /// Mean trajectory of one compartment.
    pub fn mean_of(&self, k: usize) -> Vec<f64> {
        self.mean.iter().map(|row| row[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutbreakMetrics {
    pub peak: Vec<f64>,
    pub peak_time: Vec<f64>,
    pub final_size: Vec<f64>,
    pub peak_mean: f64,
    pub peak_std: f64,
    pub peak_time_mean: f64,
    pub peak_time_std: f64,
    pub final_size_mean: f64,
    pub final_size_std: f64,
    /// Maximum of the mean spreader trajectory and where it occurs.
    pub mean_trajectory_peak: f64,
    pub mean_trajectory_peak_time: f64,
}

impl OutbreakMetrics {
    pub fn from_runs(trajectories: &[Trajectory], summary: &EnsembleSummary) -> Self {
        let mut peak = Vec::with_capacity(trajectories.len());
        let mut peak_time = Vec::with_capacity(trajectories.len());
        let mut final_size = Vec::with_capacity(trajectories.len());
        for t in trajectories {
            let (pt, pv) = t.spreader_peak();
            peak.push(pv);
            peak_time.push(pt);
            final_size.push(t.final_size());
        }
        Self::from_values(peak, peak_time, final_size, summary)
    }

    fn from_values(
        peak: Vec<f64>,
        peak_time: Vec<f64>,
        final_size: Vec<f64>,
        summary: &EnsembleSummary,
    ) -> Self {
        let (peak_mean, peak_std) = sorted_mean_std(&peak);
        let (peak_time_mean, peak_time_std) = sorted_mean_std(&peak_time);
        let (final_size_mean, final_size_std) = sorted_mean_std(&final_size);
        let spreaders = summary.mean_of(2);
        let (mut at, mut best) = (0, spreaders[0]);
        for (j, &v) in spreaders.iter().enumerate().skip(1) {
            if v > best {
                at = j;
                best = v;
            }
        }
        OutbreakMetrics {
            peak,
            peak_time,
            final_size,
            peak_mean,
            peak_std,
            peak_time_mean,
            peak_time_std,
            final_size_mean,
            final_size_std,
            mean_trajectory_peak: best,
            mean_trajectory_peak_time: summary.times[at],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub summary: EnsembleSummary,
    pub metrics: OutbreakMetrics,
    pub trajectories: Option<Vec<Trajectory>>,
    /// Ensemble-mean `I(T)` was not below `EXTINCTION_THRESHOLD * N`, so
    /// the final sizes are not yet final.
    pub horizon_warning: bool,
    pub projection_events: usize,
}

/// Integrates `run_count` realisations; run `k` uses `derive_seed(base_seed, k)`.
pub fn run_ensemble(
    p: &ModelParams,
    history: &HistoryFunction,
    cfg: &IntegratorConfig,
    opts: &EnsembleOptions,
) -> Result<EnsembleOutput> {
    if opts.run_count == 0 {
        return Err(Error::invalid("run_count", "must be at least 1"));
    }
    if !(opts.ci_level > 0.0 && opts.ci_level < 1.0) {
        return Err(Error::invalid(
            "ci_level",
            format!("must lie in (0, 1), got {}", opts.ci_level),
        ));
    }
    // Surface configuration errors once rather than per run.
    cfg.steps()?;
    cfg.delay_steps(p.tau)?;
    p.check_admissible()?;

    let trajectories: Vec<Trajectory> = (0..opts.run_count)
        .into_par_iter()
        .map(|k| {
            integrate(p, history, cfg, derive_seed(opts.base_seed, k as u64)).map_err(|e| {
                Error::Run {
                    index: k,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;

    let summary = summarize(&trajectories, opts)?;
    let metrics = OutbreakMetrics::from_runs(&trajectories, &summary);
    let terminal_i = summary.mean.last().map(|row| row[2]).unwrap_or(0.0);
    let horizon_warning = terminal_i >= EXTINCTION_THRESHOLD * p.population;
    if horizon_warning {
        warn!(
            "mean I(T) = {terminal_i:.3e} is not below {EXTINCTION_THRESHOLD:e} N; \
             final sizes are not yet final at T = {}",
            cfg.horizon
        );
    }
    let projection_events = trajectories.iter().map(|t| t.projection_events).sum();
    Ok(EnsembleOutput {
        summary,
        metrics,
        trajectories: opts.retain_trajectories.then_some(trajectories),
        horizon_warning,
        projection_events,
    })
}

/// Pointwise mean/std/band over runs sharing one grid.
pub fn summarize(trajectories: &[Trajectory], opts: &EnsembleOptions) -> Result<EnsembleSummary> {
    let first = trajectories.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let points = first.len();
    if trajectories.iter().any(|t| t.len() != points) {
        return Err(Error::GridMismatch("runs have different recording grids".into()));
    }

    let moments = match opts.merge {
        MergeMode::Sequential => trajectories
            .iter()
            .fold(PointwiseMoments::new(points), |mut acc, t| {
                acc.push(t);
                acc
            }),
        MergeMode::Parallel => trajectories
            .par_iter()
            .map(PointwiseMoments::from_trajectory)
            .reduce(|| PointwiseMoments::new(points), PointwiseMoments::merge),
    };

    let mean = moments.mean().to_vec();
    let spread = match moments.std() {
        None => None,
        Some(std) => {
            let mut lower = vec![[0.0; COMPARTMENTS]; points];
            let mut upper = vec![[0.0; COMPARTMENTS]; points];
            let mut column = vec![0.0; trajectories.len()];
            for j in 0..points {
                for k in 0..COMPARTMENTS {
                    for (slot, t) in column.iter_mut().zip(trajectories) {
                        *slot = t.states[j].0[k];
                    }
                    let (lo, hi) = match opts.ci_method {
                        CiMethod::Quantile => confidence_band(&column, opts.ci_level, opts.ci_method)?,
                        CiMethod::Normal => {
                            let z = normal_quantile(1.0 - (1.0 - opts.ci_level) / 2.0);
                            (mean[j][k] - z * std[j][k], mean[j][k] + z * std[j][k])
                        }
                    };
                    // A skewed sample can put the mean outside its quantile band.
                    lower[j][k] = lo.min(mean[j][k]);
                    upper[j][k] = hi.max(mean[j][k]);
                }
            }
            Some(Spread { std, lower, upper })
        }
    };

    Ok(EnsembleSummary {
        times: first.times.clone(),
        mean,
        spread,
        ci_level: opts.ci_level,
        ci_method: opts.ci_method,
        run_count: trajectories.len(),
    })
}
