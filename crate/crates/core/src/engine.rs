//! Euler-Maruyama integration of the delayed system on a fixed grid.
//!
//! One step is
//!
//! ```text
//! X(t + h) = X(t) + b(X(t), X(t - tau)) h + diag(noise) X(t) dW,   dW ~ N(0, h I)
//! ```
//!
//! The delay must be a whole number `k` of steps. For step `n < k` the
//! delayed state comes from the history function at `(n - k) h`; for
//! `n >= k` it is the stored state of step `n - k`, read from a ring buffer.
//! Stochastic paths do not conserve `N`: the six noise terms are independent
//! and nothing renormalises them.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::{diffusion, drift, HistoryFunction, ModelParams, StateVector, COMPARTMENTS};
use crate::noise::WienerStream;

/// Relative tolerance for `T / h` and `tau / h` being whole numbers.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub horizon: f64,
    pub projection: bool,
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    /// `h = 0.1`, `T = 200`, projection on, every step recorded.
    fn default() -> Self {
        IntegratorConfig {
            step: 0.1,
            horizon: 200.0,
            projection: true,
            record_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, horizon: f64) -> Self {
        IntegratorConfig {
            step,
            horizon,
            ..Default::default()
        }
    }

    pub fn with_projection(mut self, on: bool) -> Self {
        self.projection = on;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Number of Euler steps `T / h`, validating the grid.
    pub fn steps(&self) -> Result<usize> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Config(format!(
                "step size must be finite and positive, got {}",
                self.step
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be finite and positive, got {}",
                self.horizon
            )));
        }
        let n = whole_steps(self.horizon, self.step).ok_or_else(|| {
            Error::Config(format!(
                "horizon {} is not a whole number of steps of size {}",
                self.horizon, self.step
            ))
        })?;
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        if n % self.record_stride != 0 {
            return Err(Error::Config(format!(
                "{n} steps are not divisible by record_stride {}; t = T would not be recorded",
                self.record_stride
            )));
        }
        Ok(n)
    }

    /// Delay expressed in steps.
    pub fn delay_steps(&self, tau: f64) -> Result<usize> {
        if tau == 0.0 {
            return Ok(0);
        }
        whole_steps(tau, self.step).ok_or_else(|| {
            Error::Config(format!(
                "delay {tau} is not a whole number of steps of size {}",
                self.step
            ))
        })
    }

    /// Time of recorded point `j`.
    pub fn record_time(&self, j: usize) -> f64 {
        (j * self.record_stride) as f64 * self.step
    }
}

fn whole_steps(span: f64, step: f64) -> Option<usize> {
    let ratio = span / step;
    let rounded = ratio.round();
    if rounded < 0.0 || (ratio - rounded).abs() > GRID_TOLERANCE * rounded.max(1.0) {
        None
    } else {
        Some(rounded as usize)
    }
}

/// One realisation on the recording grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Steps in which at least one component was clamped to zero.
    pub projection_events: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &StateVector {
        self.states.last().expect("trajectory always holds t = 0")
    }

    /// `(time, value)` of the first maximum of the spreader class.
    pub fn spreader_peak(&self) -> (f64, f64) {
        let mut best = (self.times[0], self.states[0].i());
        for (t, s) in self.times.iter().zip(&self.states).skip(1) {
            if s.i() > best.1 {
                best = (*t, s.i());
            }
        }
        best
    }

    /// `R(T) + F(T)`.
    pub fn final_size(&self) -> f64 {
        let x = self.terminal();
        x.r() + x.f()
    }
}

/// Delayed-state source used by the integrators: history first, then the
/// path itself `k` steps back.
#[derive(Debug)]
pub(crate) struct DelayLine<T> {
    lag: usize,
    buffer: VecDeque<T>,
}

impl<T: Copy> DelayLine<T> {
    pub(crate) fn new(lag: usize, initial: T) -> Self {
        let mut buffer = VecDeque::with_capacity(lag + 1);
        buffer.push_back(initial);
        Self { lag, buffer }
    }

    /// Delayed value for step `n`, or `None` while `n < lag`.
    pub(crate) fn delayed(&self, n: usize) -> Option<T> {
        if n < self.lag {
            None
        } else {
            // The buffer holds states n - lag ..= n.
            self.buffer.front().copied()
        }
    }

    /// Appends the state of step `n + 1`.
    pub(crate) fn push(&mut self, value: T) {
        self.buffer.push_back(value);
        if self.buffer.len() > self.lag + 1 {
            self.buffer.pop_front();
        }
    }
}

/// Integrates one realisation. The result is a deterministic function of
/// `(p, history, cfg, seed)`.
pub fn integrate(
    p: &ModelParams,
    history: &HistoryFunction,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<Trajectory> {
    p.check_admissible()?;
    let steps = cfg.steps()?;
    let lag = cfg.delay_steps(p.tau)?;
    if history.span() < p.tau * (1.0 - GRID_TOLERANCE) {
        return Err(Error::Config(format!(
            "history covers [-{}, 0] but the delay is {}",
            history.span(),
            p.tau
        )));
    }

    let h = cfg.step;
    let sqrt_h = h.sqrt();
    let stochastic = !p.noise.is_zero();
    let mut stream = WienerStream::new(seed);

    let mut x = history.initial_state();
    let mut line = DelayLine::new(lag, x);
    let records = steps / cfg.record_stride + 1;
    let mut times = Vec::with_capacity(records);
    let mut states = Vec::with_capacity(records);
    times.push(0.0);
    states.push(x);
    let mut projection_events = 0;

    for n in 0..steps {
        let delayed = line
            .delayed(n)
            .unwrap_or_else(|| history.at((n as f64 - lag as f64) * h));
        let b = drift(&x, &delayed, p);
        let mut next = [0.0; COMPARTMENTS];
        if stochastic {
            let sigma = diffusion(&x, p);
            let dw = stream.next_increments();
            for k in 0..COMPARTMENTS {
                next[k] = x.0[k] + b[k] * h + sigma[k] * dw[k] * sqrt_h;
            }
        } else {
            for k in 0..COMPARTMENTS {
                next[k] = x.0[k] + b[k] * h;
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: n + 1,
                time: (n + 1) as f64 * h,
            });
        }
        if cfg.projection && next.iter().any(|&v| v < 0.0) {
            for v in next.iter_mut() {
                *v = v.max(0.0);
            }
            projection_events += 1;
        }
        x = StateVector(next);
        line.push(x);
        if (n + 1) % cfg.record_stride == 0 {
            times.push(cfg.record_time((n + 1) / cfg.record_stride));
            states.push(x);
        }
    }

    Ok(Trajectory {
        times,
        states,
        projection_events,
    })
}
