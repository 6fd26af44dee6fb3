//! Parameters, state space and vector fields of the six-compartment rumor model.
//!
//! Compartments, in order: susceptible `S`, exposed `E`, active spreaders `I`,
//! removed `R`, skeptical `Ig` and fact-checked `F`. With `I_tau = I(t - tau)`
//! the drift is
//!
//! ```text
//! dS  = -beta S I_tau
//! dE  =  beta S I_tau - sigma_act E
//! dI  =  sigma_act E - (gamma + rho) I
//! dR  =  gamma I
//! dIg =  rho I - theta Ig
//! dF  =  theta Ig
//! ```
//!
//! and every compartment carries its own multiplicative noise `noise_k * x_k dW_k`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result, Violation};

pub const COMPARTMENTS: usize = 6;

/// Plain six-component vector, used for rates and other signed quantities.
pub type Vector6 = [f64; COMPARTMENTS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    Susceptible,
    Exposed,
    Spreader,
    Removed,
    Skeptical,
    FactChecked,
}

impl Compartment {
    pub const ALL: [Compartment; COMPARTMENTS] = [
        Compartment::Susceptible,
        Compartment::Exposed,
        Compartment::Spreader,
        Compartment::Removed,
        Compartment::Skeptical,
        Compartment::FactChecked,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short column label used in CSV headers and plot legends.
    pub fn label(self) -> &'static str {
        match self {
            Compartment::Susceptible => "S",
            Compartment::Exposed => "E",
            Compartment::Spreader => "I",
            Compartment::Removed => "R",
            Compartment::Skeptical => "Ig",
            Compartment::FactChecked => "F",
        }
    }
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One point `(S, E, I, R, Ig, F)` in compartment space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector(pub Vector6);

impl StateVector {
    pub const ZERO: StateVector = StateVector([0.0; COMPARTMENTS]);

    pub fn new(s: f64, e: f64, i: f64, r: f64, ig: f64, f: f64) -> Self {
        StateVector([s, e, i, r, ig, f])
    }

    /// The rumor-free equilibrium `(N, 0, 0, 0, 0, 0)`.
    pub fn rumor_free(population: f64) -> Self {
        StateVector::new(population, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn s(&self) -> f64 {
        self.0[0]
    }
    pub fn e(&self) -> f64 {
        self.0[1]
    }
    pub fn i(&self) -> f64 {
        self.0[2]
    }
    pub fn r(&self) -> f64 {
        self.0[3]
    }
    pub fn ig(&self) -> f64 {
        self.0[4]
    }
    pub fn f(&self) -> f64 {
        self.0[5]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn as_array(&self) -> &Vector6 {
        &self.0
    }
}

impl Index<Compartment> for StateVector {
    type Output = f64;

    fn index(&self, c: Compartment) -> &f64 {
        &self.0[c.index()]
    }
}

impl IndexMut<Compartment> for StateVector {
    fn index_mut(&mut self, c: Compartment) -> &mut f64 {
        &mut self.0[c.index()]
    }
}

impl From<Vector6> for StateVector {
    fn from(v: Vector6) -> Self {
        StateVector(v)
    }
}

/// Per-compartment noise intensities multiplying the Wiener increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIntensities(pub Vector6);

impl NoiseIntensities {
    pub const ZERO: NoiseIntensities = NoiseIntensities([0.0; COMPARTMENTS]);

    pub fn uniform(level: f64) -> Self {
        NoiseIntensities([level; COMPARTMENTS])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        NoiseIntensities(self.0.map(|v| v * factor))
    }

    pub fn get(&self, c: Compartment) -> f64 {
        self.0[c.index()]
    }

    pub fn set(&mut self, c: Compartment, value: f64) {
        self.0[c.index()] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Largest squared intensity; the Lipschitz/growth constant of the diffusion.
    pub fn max_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).fold(0.0, f64::max)
    }
}

/// Rate constants, delay, noise intensities and population size.
///
/// `sigma_act` is the exposed-to-spreader activation rate; it is unrelated to
/// the per-compartment `noise` intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub beta: f64,
    pub sigma_act: f64,
    pub gamma: f64,
    pub rho: f64,
    pub theta: f64,
    pub tau: f64,
    pub noise: NoiseIntensities,
    pub population: f64,
}

/// Noise level used by [`ModelParams::reference`].
pub const DEFAULT_NOISE: f64 = 0.01;

/// Spreader seed of the default initial condition.
pub const DEFAULT_INITIAL_SPREADERS: f64 = 0.005;

impl ModelParams {
    /// The baseline parameter set behind the ablation grid: `N = 1`,
    /// `gamma + rho = 0.15` split as 0.10/0.05, `sigma_act = 0.25`,
    /// `theta = 0.10`, uniform noise [`DEFAULT_NOISE`], `tau = 0` and `R0 = 2`.
    ///
    /// Only `gamma + rho` is pinned by the published table (its beta column is
    /// `0.15 * R0`); the other values are assumptions.
    pub fn reference() -> Self {
        ModelParams {
            beta: 0.30,
            sigma_act: 0.25,
            gamma: 0.10,
            rho: 0.05,
            theta: 0.10,
            tau: 0.0,
            noise: NoiseIntensities::uniform(DEFAULT_NOISE),
            population: 1.0,
        }
    }

    pub fn removal_rate(&self) -> f64 {
        self.gamma + self.rho
    }

    /// Returns a copy whose `beta` realises the given reproduction number.
    pub fn with_r0(mut self, r0: f64) -> Self {
        self.beta = r0 * self.removal_rate() / self.population;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_noise(mut self, noise: NoiseIntensities) -> Self {
        self.noise = noise;
        self
    }

    /// Full validation for user-supplied parameters: every rate strictly
    /// positive, `tau >= 0`, noise `>= 0`, `N > 0`. Reports every violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, value) in self.rates() {
            if !(value.is_finite() && value > 0.0) {
                out.push(Violation::new(
                    name,
                    format!("must be finite and strictly positive, got {value}"),
                ));
            }
        }
        self.check_common(&mut out);
        out
    }

    /// Structural admissibility used by the numerical routines. Unlike
    /// [`validate`](Self::validate) it allows zero transmission, activation
    /// or verification rates (degenerate but well-defined systems); it still
    /// requires `gamma + rho > 0`.
    pub fn check_admissible(&self) -> Result<()> {
        let mut out = Vec::new();
        for (name, value) in self.rates() {
            if !(value.is_finite() && value >= 0.0) {
                out.push(Violation::new(
                    name,
                    format!("must be finite and non-negative, got {value}"),
                ));
            }
        }
        if self.removal_rate().is_nan() || self.removal_rate() <= 0.0 {
            out.push(Violation::new(
                "gamma+rho",
                "removal rate gamma + rho must be strictly positive",
            ));
        }
        self.check_common(&mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(out))
        }
    }

    fn rates(&self) -> [(&'static str, f64); 5] {
        [
            ("beta", self.beta),
            ("sigma_act", self.sigma_act),
            ("gamma", self.gamma),
            ("rho", self.rho),
            ("theta", self.theta),
        ]
    }

    fn check_common(&self, out: &mut Vec<Violation>) {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            out.push(Violation::new(
                "tau",
                format!("must be finite and non-negative, got {}", self.tau),
            ));
        }
        for c in Compartment::ALL {
            let v = self.noise.get(c);
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(
                    format!("noise.{}", c.label()),
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        if !(self.population.is_finite() && self.population > 0.0) {
            out.push(Violation::new(
                "population",
                format!("must be finite and strictly positive, got {}", self.population),
            ));
        }
    }
}

/// Drift `b(x, x_delayed)`; only the spreader component of `delayed` enters.
/// The six components cancel exactly in exact arithmetic.
pub fn drift(x: &StateVector, delayed: &StateVector, p: &ModelParams) -> Vector6 {
    let infection = p.beta * x.s() * delayed.i();
    let activation = p.sigma_act * x.e();
    let stifling = p.gamma * x.i();
    let skepticism = p.rho * x.i();
    let verification = p.theta * x.ig();
    [
        -infection,
        infection - activation,
        activation - stifling - skepticism,
        stifling,
        skepticism - verification,
        verification,
    ]
}

/// Diagonal of the diffusion matrix: `noise_k * x_k`.
pub fn diffusion(x: &StateVector, p: &ModelParams) -> Vector6 {
    let mut out = [0.0; COMPARTMENTS];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = p.noise.0[k] * x.0[k];
    }
    out
}

/// `R0 = beta N / (gamma + rho)`.
pub fn reproduction_number(p: &ModelParams) -> Result<f64> {
    let removal = p.removal_rate();
    if removal.is_nan() || removal <= 0.0 {
        return Err(Error::invalid(
            "gamma+rho",
            "degenerate denominator: gamma + rho must be strictly positive",
        ));
    }
    Ok(p.beta * p.population / removal)
}

/// `(1 - noise_I^2 / (2 (gamma + rho))) - R0`. A positive value means the
/// sufficient mean-square stability condition for the rumor-free state holds.
pub fn stochastic_margin(p: &ModelParams) -> Result<f64> {
    let r0 = reproduction_number(p)?;
    let noise_i = p.noise.get(Compartment::Spreader);
    Ok(1.0 - noise_i * noise_i / (2.0 * p.removal_rate()) - r0)
}

/// Initial trajectory segment on `[-tau, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistoryFunction {
    Constant(StateVector),
    /// Uniform samples on `[-span, 0]`, first sample at `-span`, linearly
    /// interpolated.
    Sampled { span: f64, samples: Vec<StateVector> },
}

/// Relative tolerance on the `sum = N` constraint for history samples.
pub const HISTORY_MASS_TOLERANCE: f64 = 1e-9;

impl HistoryFunction {
    /// Constant history; the state must be non-negative and sum to `population`.
    pub fn constant(state: StateVector, population: f64) -> Result<Self> {
        check_history_sample(&state, population, 0)?;
        Ok(HistoryFunction::Constant(state))
    }

    /// Sampled history on `[-span, 0]`. Requires at least two samples when
    /// `span > 0`.
    pub fn sampled(span: f64, samples: Vec<StateVector>, population: f64) -> Result<Self> {
        if !(span.is_finite() && span >= 0.0) {
            return Err(Error::invalid("history.span", "must be finite and non-negative"));
        }
        if samples.is_empty() || (span > 0.0 && samples.len() < 2) {
            return Err(Error::invalid(
                "history.samples",
                "need at least two samples for a non-degenerate interval",
            ));
        }
        for (k, s) in samples.iter().enumerate() {
            check_history_sample(s, population, k)?;
        }
        Ok(HistoryFunction::Sampled { span, samples })
    }

    /// The default start: `I(0) = DEFAULT_INITIAL_SPREADERS`, everyone else
    /// susceptible, held constant over the delay interval.
    pub fn default_for(p: &ModelParams) -> Result<Self> {
        let i0 = DEFAULT_INITIAL_SPREADERS;
        HistoryFunction::constant(
            StateVector::new(p.population - i0, 0.0, i0, 0.0, 0.0, 0.0),
            p.population,
        )
    }

    /// Length of the interval this history covers (infinite for constants).
    pub fn span(&self) -> f64 {
        match self {
            HistoryFunction::Constant(_) => f64::INFINITY,
            HistoryFunction::Sampled { span, .. } => *span,
        }
    }

    /// Evaluates the history at `xi` in `[-span, 0]`; out-of-range arguments
    /// are clamped to the interval.
    pub fn at(&self, xi: f64) -> StateVector {
        match self {
            HistoryFunction::Constant(s) => *s,
            HistoryFunction::Sampled { span, samples } => {
                if samples.len() == 1 || *span == 0.0 {
                    return *samples.last().expect("non-empty history");
                }
                let intervals = (samples.len() - 1) as f64;
                let pos = ((xi + span) / span).clamp(0.0, 1.0) * intervals;
                let lo = (pos.floor() as usize).min(samples.len() - 2);
                let w = pos - lo as f64;
                let (a, b) = (&samples[lo], &samples[lo + 1]);
                let mut out = [0.0; COMPARTMENTS];
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = a.0[k] + w * (b.0[k] - a.0[k]);
                }
                StateVector(out)
            }
        }
    }

    pub fn initial_state(&self) -> StateVector {
        self.at(0.0)
    }
}

fn check_history_sample(s: &StateVector, population: f64, index: usize) -> Result<()> {
    let mut out = Vec::new();
    if !s.is_finite() || !s.is_nonnegative() {
        out.push(Violation::new(
            format!("history[{index}]"),
            "every component must be finite and non-negative",
        ));
    }
    let total = s.total();
    if (total - population).abs() > HISTORY_MASS_TOLERANCE * population.abs().max(1.0) {
        out.push(Violation::new(
            format!("history[{index}]"),
            format!("components must sum to N = {population}, got {total}"),
        ));
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(out))
    }
}
