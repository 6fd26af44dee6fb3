//! Sampled checks of the growth, Lipschitz and second-moment estimates that
//! underpin existence and non-explosion of solutions.
//!
//! The drift is bilinear in `(S, I_tau)`, so no single constant bounds
//! `|b|^2` by `K (1 + |x|^2 + |y|^2)` on all of `R^6`; the constants below
//! hold on the ball `|x|, |y| <= R` and grow with `R`.
//!
//! Growth. Using `(a - b)^2 <= 2a^2 + 2b^2` on each component and
//! `(x1 y3)^2 <= R^2 x1^2`:
//!
//! ```text
//! |b|^2 <= 3 beta^2 R^2 x1^2 + 4 sigma^2 x2^2
//!          + (2 (gamma + rho)^2 + gamma^2 + 2 rho^2) x3^2 + 3 theta^2 x5^2
//! |Sigma(x)|^2 <= max_k noise_k^2 |x|^2
//! K_R = max(3 beta^2 R^2, 4 sigma^2, 2 (gamma + rho)^2 + gamma^2 + 2 rho^2, 3 theta^2)
//!       + max_k noise_k^2
//! ```
//!
//! Lipschitz. From `|x1 y3 - x1' y3'| <= R (|dx1| + |dy3|)`, summing the
//! component bounds and applying Cauchy-Schwarz:
//!
//! ```text
//! |b(x, y) - b(x', y')| <= |(2 beta R, 2 sigma, 2 (gamma + rho), 2 theta)| |dx| + 2 beta R |dy|
//! L_R = max(|(2 beta R, 2 sigma, 2 (gamma + rho), 2 theta)|, 2 beta R)
//! ```
//!
//! Second moment. For `V = |X|^2` on non-negative paths whose components stay
//! below `M`, with `2 beta S E I_tau <= beta (S^2 + M^2 E^2)` and
//! `2ab <= a^2 + b^2` on the remaining cross terms, the generator obeys
//! `LV <= C |X|^2` where
//!
//! ```text
//! C = max(0, beta + s_S^2, beta M^2 - sigma + s_E^2, sigma - (gamma + rho) + s_I^2,
//!         gamma + s_R^2, rho - theta + s_Ig^2, theta + s_F^2)
//! ```
//!
//! giving the envelope `E[V(t)] <= (E[V(0)] + C t) exp(C (1 + q) t)` with
//! `q = 1` (the delayed norm does not enter this bound).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::model::{diffusion, drift, ModelParams, StateVector, Vector6, COMPARTMENTS};

/// Linear-growth constant `K_R` valid on the ball of the given radius.
pub fn growth_constant(p: &ModelParams, radius: f64) -> f64 {
    let removal = p.removal_rate();
    let drift_part = [
        3.0 * p.beta * p.beta * radius * radius,
        4.0 * p.sigma_act * p.sigma_act,
        2.0 * removal * removal + p.gamma * p.gamma + 2.0 * p.rho * p.rho,
        3.0 * p.theta * p.theta,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    drift_part + p.noise.max_sq()
}

/// Local Lipschitz constant `L_R` of the drift on the ball of the given radius.
pub fn lipschitz_constant(p: &ModelParams, radius: f64) -> f64 {
    let cross = 2.0 * p.beta * radius;
    let current = [
        cross,
        2.0 * p.sigma_act,
        2.0 * p.removal_rate(),
        2.0 * p.theta,
    ]
    .iter()
    .map(|v| v * v)
    .sum::<f64>()
    .sqrt();
    current.max(cross)
}

/// Global Lipschitz constant of the diagonal diffusion.
pub fn diffusion_lipschitz_constant(p: &ModelParams) -> f64 {
    p.noise.max_sq().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthBoundReport {
    pub max_ratio: f64,
    pub bound_k: f64,
    pub samples: usize,
    pub pass: bool,
}

/// `(|b(x, y)|^2 + |Sigma(x)|^2) / (1 + |x|^2 + |y|^2)`.
pub fn growth_ratio(x: &StateVector, y: &StateVector, p: &ModelParams) -> f64 {
    let b = drift(x, y, p);
    let s = diffusion(x, p);
    let num: f64 = b.iter().chain(s.iter()).map(|v| v * v).sum();
    num / (1.0 + x.norm_sq() + y.norm_sq())
}

/// Samples non-negative pairs in the ball and compares the largest growth
/// ratio with [`growth_constant`].
pub fn verify_growth_bound(
    p: &ModelParams,
    sample_count: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<GrowthBoundReport> {
    check_sampling(sample_count, radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut max_ratio = 0.0f64;
    for _ in 0..sample_count {
        let x = StateVector(sample_ball(&mut rng, radius, true));
        let y = StateVector(sample_ball(&mut rng, radius, true));
        max_ratio = max_ratio.max(growth_ratio(&x, &y, p));
    }
    let bound_k = growth_constant(p, radius);
    Ok(GrowthBoundReport {
        max_ratio,
        bound_k,
        samples: sample_count,
        pass: max_ratio <= bound_k,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    /// Largest observed `|b(x, y) - b(x', y')| / (|dx| + |dy|)`.
    pub max_drift_quotient: f64,
    pub drift_constant: f64,
    /// Largest observed `|Sigma(x) - Sigma(x')| / |dx|`.
    pub max_diffusion_quotient: f64,
    pub diffusion_constant: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Samples pairs of points (either sign) in the ball of the given radius
/// and checks the drift and diffusion difference quotients.
pub fn verify_lipschitz(
    p: &ModelParams,
    sample_count: usize,
    radius: f64,
    rng_seed: u64,
) -> Result<LipschitzReport> {
    check_sampling(sample_count, radius)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (mut drift_q, mut diff_q) = (0.0f64, 0.0f64);
    for _ in 0..sample_count {
        let x = StateVector(sample_ball(&mut rng, radius, false));
        let xb = StateVector(sample_ball(&mut rng, radius, false));
        let y = StateVector(sample_ball(&mut rng, radius, false));
        let yb = StateVector(sample_ball(&mut rng, radius, false));
        let dx = distance(&x.0, &xb.0);
        let dy = distance(&y.0, &yb.0);
        if dx + dy > 0.0 {
            let db = distance(&drift(&x, &y, p), &drift(&xb, &yb, p));
            drift_q = drift_q.max(db / (dx + dy));
        }
        if dx > 0.0 {
            let ds = distance(&diffusion(&x, p), &diffusion(&xb, p));
            diff_q = diff_q.max(ds / dx);
        }
    }
    let drift_constant = lipschitz_constant(p, radius);
    let diffusion_constant = diffusion_lipschitz_constant(p);
    Ok(LipschitzReport {
        max_drift_quotient: drift_q,
        drift_constant,
        max_diffusion_quotient: diff_q,
        diffusion_constant,
        samples: sample_count,
        // Relative slack for rounding in the quotients.
        pass: drift_q <= drift_constant * (1.0 + 1e-12)
            && diff_q <= diffusion_constant * (1.0 + 1e-12),
    })
}

fn check_sampling(sample_count: usize, radius: f64) -> Result<()> {
    if sample_count == 0 {
        return Err(Error::invalid("sample_count", "must be at least 1"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    Ok(())
}

fn distance(a: &Vector6, b: &Vector6) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Point with a uniformly drawn norm in `[0, radius]` and a random direction
/// (restricted to the non-negative orthant when `nonnegative`). Drawing the
/// norm uniformly rather than by volume keeps samples near the origin and
/// near the boundary of the ball.
fn sample_ball(rng: &mut ChaCha8Rng, radius: f64, nonnegative: bool) -> Vector6 {
    let mut v = [0.0; COMPARTMENTS];
    for slot in v.iter_mut() {
        let u = unit(rng);
        *slot = if nonnegative { u } else { 2.0 * u - 1.0 };
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return v;
    }
    let scale = radius * unit(rng) / norm;
    v.map(|x| x * scale)
}

/// Generator constant `C` for paths whose components stay below `localization`.
pub fn generator_constant(p: &ModelParams, localization: f64) -> f64 {
    let n = &p.noise.0;
    let m2 = localization * localization;
    [
        0.0,
        p.beta + n[0] * n[0],
        p.beta * m2 - p.sigma_act + n[1] * n[1],
        p.sigma_act - p.removal_rate() + n[2] * n[2],
        p.gamma + n[3] * n[3],
        p.rho - p.theta + n[4] * n[4],
        p.theta + n[5] * n[5],
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `t -> (E[V(0)] + C t) exp(C (1 + q) t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEnvelope {
    pub initial_moment: f64,
    pub c: f64,
    pub q: f64,
}

impl MomentEnvelope {
    pub fn at(&self, t: f64) -> f64 {
        (self.initial_moment + self.c * t) * (self.c * (1.0 + self.q) * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentBoundReport {
    pub times: Vec<f64>,
    /// Ensemble mean of `|X(t)|^2`.
    pub second_moment: Vec<f64>,
    pub envelope: MomentEnvelope,
    /// Largest component seen on any path (the localization level `M`).
    pub localization: f64,
    pub nonfinite_count: usize,
    /// Largest `second_moment / envelope` over the grid.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Compares the ensemble second moment with its envelope at every grid point.
pub fn check_moment_bound(trajectories: &[Trajectory], p: &ModelParams) -> Result<MomentBoundReport> {
    let first = trajectories.first().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
    let points = first.len();
    if trajectories.iter().any(|t| t.len() != points) {
        return Err(Error::GridMismatch("runs have different recording grids".into()));
    }
    let mut nonfinite_count = 0;
    let mut localization = 1.0f64;
    let mut second_moment = vec![0.0; points];
    for t in trajectories {
        for (acc, s) in second_moment.iter_mut().zip(&t.states) {
            if !s.is_finite() {
                nonfinite_count += 1;
                continue;
            }
            localization = s.0.iter().fold(localization, |m, v| m.max(v.abs()));
            *acc += s.norm_sq();
        }
    }
    let runs = trajectories.len() as f64;
    second_moment.iter_mut().for_each(|v| *v /= runs);

    let envelope = MomentEnvelope {
        initial_moment: second_moment[0],
        c: generator_constant(p, localization),
        q: 1.0,
    };
    let mut max_ratio = 0.0f64;
    let mut within = true;
    for (t, m) in first.times.iter().zip(&second_moment) {
        let bound = envelope.at(*t);
        within &= m.is_finite() && *m <= bound * (1.0 + 1e-12);
        max_ratio = max_ratio.max(m / bound);
    }
    Ok(MomentBoundReport {
        times: first.times.clone(),
        second_moment,
        envelope,
        localization,
        nonfinite_count,
        max_ratio,
        pass: within && nonfinite_count == 0,
    })
}
