use infodemic_core::noise::{derive_seed, wiener_increments, WienerStream};

const DRAWS: usize = 1_000_000;

#[test]
fn unit_normal_moments_over_a_million_draws() {
    // 6 components per step, so a million draws per component needs as many
    // steps.
    let mut stream = WienerStream::new(derive_seed(2024, 0));
    let mut sum = [0.0f64; 6];
    let mut sq = [0.0f64; 6];
    let mut cross = 0.0f64;
    for _ in 0..DRAWS {
        let z = stream.next_increments();
        for k in 0..6 {
            sum[k] += z[k];
            sq[k] += z[k] * z[k];
        }
        cross += z[1] * z[2];
    }
    let n = DRAWS as f64;
    for k in 0..6 {
        let mean = sum[k] / n;
        let var = sq[k] / n - mean * mean;
        assert!(mean.abs() < 4.0 / n.sqrt(), "component {k} mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "component {k} variance {var}");
    }
    assert!((cross / n).abs() < 0.01, "cross correlation {}", cross / n);
}

#[test]
fn consecutive_steps_are_uncorrelated() {
    let seed = 99;
    let n = 200_000;
    let mut lag1 = 0.0;
    let mut prev = wiener_increments(seed, 0)[2];
    for step in 1..n {
        let z = wiener_increments(seed, step as u64)[2];
        lag1 += prev * z;
        prev = z;
    }
    assert!((lag1 / n as f64).abs() < 0.01);
}
