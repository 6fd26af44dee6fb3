//! Equilibria, final sizes and empirical mean-square stability of the
//! rumor-free state.
//!
//! Every equilibrium has `E = I = Ig = 0`; the remaining mass is split
//! arbitrarily among `S`, `R` and `F`. Near `(N, 0, 0, 0, 0, 0)` the
//! `(E, I)` pair follows the linear delayed system
//!
//! ```text
//! dE = (beta N I(t - tau) - sigma_act E) dt + noise_E E dW_E
//! dI = (sigma_act E - (gamma + rho) I) dt + noise_I I dW_I
//! ```
//!
//! whose second moment `E[E^2 + I^2]` is estimated here by Monte Carlo.

use log::warn;
use rayon::prelude::*;

use crate::engine::{DelayLine, IntegratorConfig, Trajectory};
use crate::ensemble::{EnsembleSummary, EXTINCTION_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{drift, reproduction_number, stochastic_margin, Compartment, ModelParams, StateVector};
use crate::noise::{derive_seed, WienerStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumClass {
    /// `(N, 0, 0, 0, 0, 0)`.
    RumorFree,
    /// `(S, 0, 0, R, 0, F)` with a nontrivial split.
    FamilyMember,
    NotEquilibrium,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub candidate: StateVector,
    pub drift_residual: f64,
    pub class: EquilibriumClass,
    /// `|S + E + I + R + Ig + F - N|`.
    pub conservation_residual: f64,
}

impl EquilibriumReport {
    pub fn is_equilibrium(&self) -> bool {
        self.class != EquilibriumClass::NotEquilibrium
    }
}

pub fn classify_equilibrium(x: &StateVector, p: &ModelParams, tol: f64) -> Result<EquilibriumReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let b = drift(x, x, p);
    let drift_residual = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let quiet = x.e().abs() <= tol && x.i().abs() <= tol && x.ig().abs() <= tol;
    let class = if !(quiet && drift_residual <= tol) {
        EquilibriumClass::NotEquilibrium
    } else if (x.s() - p.population).abs() <= tol && x.r().abs() <= tol && x.f().abs() <= tol {
        EquilibriumClass::RumorFree
    } else {
        EquilibriumClass::FamilyMember
    };
    Ok(EquilibriumReport {
        candidate: *x,
        drift_residual,
        class,
        conservation_residual: (x.total() - p.population).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Decay,
    Growth,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Decay => "decay",
            Verdict::Growth => "growth",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Terminal/initial ratio at or below which decay is declared.
pub const DECAY_RATIO: f64 = 1e-2;
/// Terminal/initial ratio at or above which growth is declared.
pub const GROWTH_RATIO: f64 = 1e2;
/// Estimates below this are excluded from the rate fit.
pub const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanSquareDecayReport {
    pub times: Vec<f64>,
    /// Ensemble estimate of `E[E(t)^2 + I(t)^2]`.
    pub estimate: Vec<f64>,
    /// Least-squares slope of `ln estimate` over the fit window, if it holds
    /// at least two points.
    pub fitted_rate: Option<f64>,
    pub margin: f64,
    pub r0: f64,
    pub verdict: Verdict,
    pub run_count: usize,
}

impl MeanSquareDecayReport {
    pub fn ratio(&self) -> f64 {
        self.estimate[self.estimate.len() - 1] / self.estimate[0]
    }
}

/// Monte Carlo estimate of the second moment of the linearised `(E, I)` system
/// started from the constant history `(e0, i0)`.
///
/// Run `k` draws its increments from `derive_seed(base_seed, k)`, using the
/// exposed and spreader channels of the six-component stream. The projection
/// flag of `cfg` is ignored: the linear system is not confined to the orthant.
pub fn simulate_linearized(
    p: &ModelParams,
    e0: f64,
    i0: f64,
    cfg: &IntegratorConfig,
    run_count: usize,
    base_seed: u64,
) -> Result<MeanSquareDecayReport> {
    p.check_admissible()?;
    if !(e0 >= 0.0 && i0 >= 0.0 && e0 + i0 > 0.0) {
        return Err(Error::invalid(
            "e0,i0",
            "initial perturbation must be non-negative and not identically zero",
        ));
    }
    if run_count == 0 {
        return Err(Error::invalid("run_count", "must be at least 1"));
    }
    let steps = cfg.steps()?;
    let lag = cfg.delay_steps(p.tau)?;
    let margin = stochastic_margin(p)?;
    let r0 = reproduction_number(p)?;

    let paths: Vec<Vec<f64>> = (0..run_count)
        .into_par_iter()
        .map(|k| linear_path(p, e0, i0, cfg, steps, lag, derive_seed(base_seed, k as u64)))
        .collect::<Result<_>>()?;

    let points = steps / cfg.record_stride + 1;
    let mut estimate = vec![0.0; points];
    for path in &paths {
        for (acc, v) in estimate.iter_mut().zip(path) {
            *acc += v;
        }
    }
    for v in estimate.iter_mut() {
        *v /= run_count as f64;
    }
    let times: Vec<f64> = (0..points).map(|j| cfg.record_time(j)).collect();

    let fitted_rate = fit_decay_rate(&times, &estimate, cfg.horizon);
    let ratio = estimate[points - 1] / estimate[0];
    let verdict = if ratio <= DECAY_RATIO {
        Verdict::Decay
    } else if ratio >= GROWTH_RATIO {
        Verdict::Growth
    } else {
        Verdict::Inconclusive
    };

    Ok(MeanSquareDecayReport {
        times,
        estimate,
        fitted_rate,
        margin,
        r0,
        verdict,
        run_count,
    })
}

fn linear_path(
    p: &ModelParams,
    e0: f64,
    i0: f64,
    cfg: &IntegratorConfig,
    steps: usize,
    lag: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let h = cfg.step;
    let sqrt_h = h.sqrt();
    let gain = p.beta * p.population;
    let removal = p.removal_rate();
    let noise_e = p.noise.get(Compartment::Exposed);
    let noise_i = p.noise.get(Compartment::Spreader);
    let stochastic = noise_e != 0.0 || noise_i != 0.0;
    let mut stream = WienerStream::new(seed);

    let (mut e, mut i) = (e0, i0);
    let mut line = DelayLine::new(lag, i);
    let mut out = Vec::with_capacity(steps / cfg.record_stride + 1);
    out.push(e * e + i * i);
    for n in 0..steps {
        let i_delayed = line.delayed(n).unwrap_or(i0);
        let mut e_next = e + (gain * i_delayed - p.sigma_act * e) * h;
        let mut i_next = i + (p.sigma_act * e - removal * i) * h;
        if stochastic {
            let dw = stream.next_increments();
            e_next += noise_e * e * dw[Compartment::Exposed.index()] * sqrt_h;
            i_next += noise_i * i * dw[Compartment::Spreader.index()] * sqrt_h;
        }
        if !(e_next.is_finite() && i_next.is_finite()) {
            return Err(Error::NonFinite {
                step: n + 1,
                time: (n + 1) as f64 * h,
            });
        }
        e = e_next;
        i = i_next;
        line.push(i);
        if (n + 1) % cfg.record_stride == 0 {
            out.push(e * e + i * i);
        }
    }
    Ok(out)
}

/// Slope of `ln estimate` against time, from `t = 0.1 T` up to (not
/// including) the first estimate below [`FIT_FLOOR`].
pub fn fit_decay_rate(times: &[f64], estimate: &[f64], horizon: f64) -> Option<f64> {
    let start = 0.1 * horizon;
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &v) in times.iter().zip(estimate) {
        if t < start {
            continue;
        }
        if v.is_nan() || v < FIT_FLOOR {
            break;
        }
        let y = v.ln();
        n += 1.0;
        sx += t;
        sy += y;
        sxx += t * t;
        sxy += t * y;
    }
    let denom = n * sxx - sx * sx;
    if n < 2.0 || denom == 0.0 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Terminal `(S, R, F)` distribution of an outbreak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalSizeReport {
    pub susceptible: f64,
    pub removed: f64,
    pub fact_checked: f64,
    /// `S + R + F`.
    pub total: f64,
    /// `|S + R + F - N|`.
    pub residual: f64,
    /// Terminal spreader mass was below `EXTINCTION_THRESHOLD * N`.
    pub extinguished: bool,
}

impl FinalSizeReport {
    /// Cumulative reach `R + F`.
    pub fn reach(&self) -> f64 {
        self.removed + self.fact_checked
    }
}

/// Anything with a terminal state that final sizes can be read from.
pub trait TerminalState {
    fn terminal_state(&self) -> StateVector;
}

impl TerminalState for Trajectory {
    fn terminal_state(&self) -> StateVector {
        *self.terminal()
    }
}

impl TerminalState for EnsembleSummary {
    fn terminal_state(&self) -> StateVector {
        StateVector(*self.mean.last().expect("summary has at least t = 0"))
    }
}

pub fn final_size<T: TerminalState + ?Sized>(source: &T, p: &ModelParams) -> FinalSizeReport {
    let x = source.terminal_state();
    let total = x.s() + x.r() + x.f();
    let extinguished = x.i() < EXTINCTION_THRESHOLD * p.population;
    if !extinguished {
        warn!(
            "terminal spreader mass {:.3e} has not died out; final size is provisional",
            x.i()
        );
    }
    FinalSizeReport {
        susceptible: x.s(),
        removed: x.r(),
        fact_checked: x.f(),
        total,
        residual: (total - p.population).abs(),
        extinguished,
    }
}
