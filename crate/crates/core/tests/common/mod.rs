//! Independent reference integrators used as test oracles. The right-hand
//! side is written out again here instead of calling into the crate.

#![allow(dead_code)]

/// `(beta, sigma, gamma, rho, theta)`.
pub type Rates = (f64, f64, f64, f64, f64);

pub fn rhs(x: &[f64; 6], y_i: f64, k: Rates) -> [f64; 6] {
    let (beta, sigma, gamma, rho, theta) = k;
    let [s, e, i, _r, ig, _f] = *x;
    let new = beta * s * y_i;
    [
        -new,
        new - sigma * e,
        sigma * e - (gamma + rho) * i,
        gamma * i,
        rho * i - theta * ig,
        theta * ig,
    ]
}

fn axpy(x: &[f64; 6], a: f64, d: &[f64; 6]) -> [f64; 6] {
    let mut out = *x;
    for k in 0..6 {
        out[k] += a * d[k];
    }
    out
}

/// Classical fourth-order Runge-Kutta for the undelayed system. Returns the
/// state at every step, starting with `x0`.
pub fn rk4(x0: [f64; 6], k: Rates, h: f64, horizon: f64) -> Vec<[f64; 6]> {
    let n = (horizon / h).round() as usize;
    let f = |x: &[f64; 6]| rhs(x, x[2], k);
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, h / 2.0, &k1));
        let k3 = f(&axpy(&x, h / 2.0, &k2));
        let k4 = f(&axpy(&x, h, &k3));
        for c in 0..6 {
            x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        out.push(x);
    }
    out
}

/// Plain explicit Euler for the delayed system with constant history `x0`,
/// reading the lagged spreader value at index `n - lag`.
pub fn delayed_euler(x0: [f64; 6], k: Rates, h: f64, lag: usize, steps: usize) -> Vec<[f64; 6]> {
    let mut path = vec![x0];
    for n in 0..steps {
        let lagged = if n >= lag { path[n - lag][2] } else { x0[2] };
        let d = rhs(&path[n], lagged, k);
        path.push(axpy(&path[n], h, &d));
    }
    path
}

pub fn max_gap(a: &[[f64; 6]], b: &[[f64; 6]]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

pub const REFERENCE_RATES: Rates = (0.30, 0.25, 0.10, 0.05, 0.10);
