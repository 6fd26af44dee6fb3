//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use infodemic_core::ablation::{SweepResult, SweepSpec};
use infodemic_core::bounds::{check_moment_bound, verify_growth_bound, verify_lipschitz};
use infodemic_core::ensemble::EnsembleOptions;
use infodemic_core::{
    classify_equilibrium, compare_to_reference, drift, integrate, run_ensemble, run_sweep,
    simulate_linearized, stochastic_margin, Compartment, EquilibriumClass, HistoryFunction,
    IntegratorConfig, ModelParams, NoiseIntensities, ReferenceTable, StateVector, Verdict,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_params(rng: &mut StdRng) -> ModelParams {
    let mut noise = [0.0; 6];
    noise.iter_mut().for_each(|v| *v = rng.random_range(0.0..0.5));
    ModelParams {
        beta: rng.random_range(0.0..5.0),
        sigma_act: rng.random_range(0.01..2.0),
        gamma: rng.random_range(0.01..2.0),
        rho: rng.random_range(0.01..2.0),
        theta: rng.random_range(0.01..2.0),
        tau: rng.random_range(0.0..20.0),
        noise: NoiseIntensities(noise),
        population: rng.random_range(0.5..1000.0),
    }
}

fn random_state(rng: &mut StdRng, n: f64) -> StateVector {
    let mut x = [0.0; 6];
    x.iter_mut().for_each(|v| *v = rng.random_range(0.0..n));
    StateVector(x)
}

fn conservation() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let p = random_params(&mut rng);
        let x = random_state(&mut rng, p.population);
        let y = random_state(&mut rng, p.population);
        let d = drift(&x, &y, &p);
        let scale: f64 = d.iter().map(|v| v.abs()).sum();
        if scale > 0.0 {
            worst = worst.max(d.iter().sum::<f64>().abs() / scale);
        }
    }
    outcome(worst <= 1e-12, format!("max relative sum {worst:.2e} over 1e5 triples"))
}

fn equilibrium_family() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut accepted = 0;
    let mut exact = true;
    let mut rejected = 0;
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let n = p.population;
        let (a, b) = (rng.random_range(0.0..1.0f64), rng.random_range(0.0..1.0f64));
        let (lo, hi) = (a.min(b), a.max(b));
        let x = StateVector::new(lo * n, 0.0, 0.0, (hi - lo) * n, 0.0, (1.0 - hi) * n);
        let r = classify_equilibrium(&x, &p, 1e-9).unwrap();
        accepted += usize::from(r.class != EquilibriumClass::NotEquilibrium);
        exact &= r.drift_residual == 0.0;
    }
    for _ in 0..100 {
        let p = random_params(&mut rng);
        let mut x = random_state(&mut rng, p.population);
        x.0[Compartment::Spreader.index()] = rng.random_range(1.001e-3..p.population.max(0.01));
        let r = classify_equilibrium(&x, &p, 1e-9).unwrap();
        rejected += usize::from(r.class == EquilibriumClass::NotEquilibrium);
    }
    outcome(
        accepted == 100 && exact && rejected == 100,
        format!("accepted {accepted}/100 (residual exactly 0: {exact}), rejected {rejected}/100"),
    )
}

fn oracle_gap(h: f64) -> f64 {
    let p = ModelParams::reference().with_noise(NoiseIntensities::ZERO);
    let history = HistoryFunction::default_for(&p).unwrap();
    let path = integrate(&p, &history, &IntegratorConfig::new(h, 200.0), 0).unwrap();
    let ours: Vec<[f64; 6]> = path.states.iter().map(|s| s.0).collect();
    let x0 = history.initial_state().0;
    let fine = oracle::rk4(x0, oracle::REFERENCE_RATES, h / 4.0, 200.0);
    let reference: Vec<[f64; 6]> = fine.iter().step_by(4).copied().collect();
    oracle::max_gap(&ours, &reference) / p.population
}

fn rk4_equivalence() -> Outcome {
    let coarse = oracle_gap(0.05);
    let fine = oracle_gap(0.025);
    let ratio = coarse / fine;
    outcome(
        coarse <= 5e-3 && (1.5..=2.5).contains(&ratio),
        format!("gap {coarse:.2e} at h=0.05, {fine:.2e} at h=0.025, ratio {ratio:.3}"),
    )
}

/// `(R0, noise on E, noise on I)`; the other channels keep the default.
const MARGIN_SETS: [(f64, f64, f64); 6] = [
    (0.3, 0.10, 0.10),
    (0.5, 0.05, 0.05),
    (0.6, 0.30, 0.30),
    (0.7, 0.01, 0.01),
    (0.8, 0.20, 0.20),
    (0.85, 0.05, 0.15),
];

fn margin_decay() -> Outcome {
    let cfg = IntegratorConfig::new(0.1, 600.0);
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;
    for (r0, se, si) in MARGIN_SETS {
        let mut p = ModelParams::reference().with_r0(r0);
        p.noise.set(Compartment::Exposed, se);
        p.noise.set(Compartment::Spreader, si);
        let margin = stochastic_margin(&p).unwrap();
        if margin <= 0.0 {
            failures.push(format!("R0={r0} has margin {margin}"));
        }
        for tau in [0.0, 5.0, 10.0] {
            let r = simulate_linearized(&p.with_tau(tau), 0.0, 0.01, &cfg, 200, 7).unwrap();
            worst_ratio = worst_ratio.max(r.ratio());
            if r.verdict != Verdict::Decay {
                failures.push(format!("R0={r0} tau={tau}: {}", r.verdict.as_str()));
            }
        }
    }
    let p = ModelParams::reference().with_r0(2.0);
    let growth = simulate_linearized(&p, 0.0, 0.01, &cfg, 200, 7).unwrap();
    if growth.verdict != Verdict::Growth {
        failures.push(format!("R0=2 tau=0: {}", growth.verdict.as_str()));
    }
    outcome(
        failures.is_empty(),
        format!(
            "18 decay cells, worst terminal/initial {worst_ratio:.1e}; R0=2 ratio {:.1e}{}",
            growth.ratio(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(", "))
            }
        ),
    )
}

fn table_reproduction(sweep: &SweepResult) -> Outcome {
    let table = ReferenceTable::published();
    let report = compare_to_reference(sweep, &table).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (tau, r0) in [(0.0, 0.5), (0.0, 2.0), (10.0, 2.0)] {
        let c = report.cell(tau, r0).unwrap();
        let r = &c.reference;
        let peak_in = (c.cell.peak_mean - r.peak_mean).abs() <= 2.0 * r.peak_std;
        let final_in =
            (c.cell.final_mean - r.final_mean).abs() <= (2.0 * r.final_std).max(0.05);
        let explained = c.flagged() && c.explanation.as_deref().is_some_and(|e| !e.is_empty());
        let mut missed = Vec::new();
        if !peak_in {
            missed.push(format!("peak {:.5} vs {:.5}", c.cell.peak_mean, r.peak_mean));
        }
        if !final_in {
            missed.push(format!("final {:.4} vs {:.4}", c.cell.final_mean, r.final_mean));
        }
        if missed.is_empty() {
            notes.push(format!("({tau},{r0}) in band"));
        } else if explained {
            notes.push(format!("({tau},{r0}) outside band, flagged: {}", missed.join(", ")));
        } else {
            ok = false;
            notes.push(format!("({tau},{r0}) outside band and NOT flagged"));
        }
    }
    outcome(ok, notes.join("; "))
}

fn sweep_structure(sweep: &SweepResult, initial_spreaders: f64) -> Outcome {
    let mut problems = Vec::new();
    let runs = sweep.runs_per_cell as f64;
    for tau in [0.0, 5.0, 10.0] {
        let row = sweep.row(tau);
        for w in row.windows(2) {
            let (a, b) = (w[0], w[1]);
            // Below threshold both statistics are flat up to sampling noise.
            let slack = |std: f64| if b.r0 < 1.0 { std / runs.sqrt() } else { 0.0 };
            if b.peak_mean < a.peak_mean - slack(a.peak_std) {
                problems.push(format!("peak drops tau={tau} R0 {}->{}", a.r0, b.r0));
            }
            if b.final_mean < a.final_mean - slack(a.final_std) {
                problems.push(format!("final drops tau={tau} R0 {}->{}", a.r0, b.r0));
            }
        }
        for c in row.iter().filter(|c| c.r0 <= 0.8) {
            if c.peak_mean > 1.5 * initial_spreaders {
                problems.push(format!("tau={tau} R0={} peak {:.5}", c.r0, c.peak_mean));
            }
        }
    }
    let p0 = sweep.cell(0.0, 2.0).unwrap().peak_mean;
    let p10 = sweep.cell(10.0, 2.0).unwrap().peak_mean;
    if p10 >= p0 {
        problems.push(format!("no tau damping at R0=2: {p10:.5} >= {p0:.5}"));
    }
    outcome(
        problems.is_empty(),
        format!(
            "monotone in R0, quiescent below 0.8, R0=2 peak {p0:.5} (tau=0) > {p10:.5} (tau=10){}",
            if problems.is_empty() {
                String::new()
            } else {
                format!("; problems: {}", problems.join(", "))
            }
        ),
    )
}

fn growth_and_lipschitz() -> Outcome {
    let p = ModelParams::reference().with_r0(2.0).with_tau(10.0);
    let g = verify_growth_bound(&p, 100_000, 10.0, 3).unwrap();
    let l1 = verify_lipschitz(&p, 100_000, 1.0, 4).unwrap();
    let l10 = verify_lipschitz(&p, 100_000, 10.0, 5).unwrap();
    outcome(
        g.pass && l1.pass && l10.pass,
        format!(
            "growth {:.3} <= K {:.3}; drift quotient {:.3} <= L_1 {:.3}, {:.3} <= L_10 {:.3}",
            g.max_ratio,
            g.bound_k,
            l1.max_drift_quotient,
            l1.drift_constant,
            l10.max_drift_quotient,
            l10.drift_constant
        ),
    )
}

fn non_explosion() -> Outcome {
    let p = ModelParams::reference().with_r0(2.0).with_tau(10.0);
    let history = HistoryFunction::default_for(&p).unwrap();
    let opts = EnsembleOptions {
        retain_trajectories: true,
        ..EnsembleOptions::default()
    };
    let out = run_ensemble(&p, &history, &IntegratorConfig::default(), &opts).unwrap();
    let r = check_moment_bound(out.trajectories.as_deref().unwrap(), &p).unwrap();
    // The envelope starts at the observed moment, so t = 0 is tight by construction.
    let later = r
        .times
        .iter()
        .zip(&r.second_moment)
        .skip(1)
        .map(|(t, m)| m / r.envelope.at(*t))
        .fold(0.0, f64::max);
    outcome(
        r.pass,
        format!(
            "max E|X|^2 / envelope over t > 0 is {later:.2e} ({} points), C = {:.3}, non-finite {}",
            r.times.len(),
            r.envelope.c,
            r.nonfinite_count
        ),
    )
}

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_infodemic"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn data_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "svg")))
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let root = tmp.path();
    let mut compared = 0;
    let mut problems = Vec::new();
    for sub in ["simulate", "ensemble", "stability", "ablate", "compare"] {
        let (a, b) = (root.join(format!("{sub}-a")), root.join(format!("{sub}-b")));
        let sweep = root.join("ablate-a").join("sweep.csv");
        let extra: Vec<&str> = if sub == "compare" {
            vec!["--sweep", sweep.to_str().unwrap()]
        } else {
            vec!["--runs", "20"]
        };
        let mut first = vec![sub, "--out", a.to_str().unwrap(), "--format", "both"];
        first.extend(&extra);
        if let Err(e) = cli(&first) {
            problems.push(format!("{sub}: {e}"));
            continue;
        }
        let echoed = a.join("effective_config.toml");
        let mut second = vec![sub, "--config", echoed.to_str().unwrap(), "--out", b.to_str().unwrap()];
        if sub == "compare" {
            second.extend(["--sweep", sweep.to_str().unwrap()]);
        }
        if let Err(e) = cli(&second) {
            problems.push(format!("{sub} rerun: {e}"));
            continue;
        }
        let (fa, fb) = (data_files(&a), data_files(&b));
        let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
        if names(&fa) != names(&fb) || fa.is_empty() {
            problems.push(format!("{sub}: different file sets"));
            continue;
        }
        for (x, y) in fa.iter().zip(&fb) {
            compared += 1;
            if fs::read(x).unwrap() != fs::read(y).unwrap() {
                problems.push(format!("{} differs", x.display()));
            }
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "{compared} CSV/SVG files byte-identical across 5 subcommands{}",
            if problems.is_empty() {
                String::new()
            } else {
                format!("; problems: {}", problems.join(", "))
            }
        ),
    )
}

fn timed(f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let o = f();
    (o, start.elapsed())
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut record = |n, name, budget_s: u64, (o, d): (Outcome, Duration)| {
        results.push((n, name, o, d, Duration::from_secs(budget_s)));
    };

    record(1, "drift conservation", 5, timed(conservation));
    record(2, "equilibrium family", 1, timed(equilibrium_family));
    record(3, "RK4 oracle equivalence", 10, timed(rk4_equivalence));
    record(4, "mean-square decay above the stochastic margin", 120, timed(margin_decay));

    let spec = SweepSpec::reference(42).unwrap();
    let initial_spreaders = spec.initial.i();
    let start = Instant::now();
    let sweep = run_sweep(&spec).unwrap();
    let sweep_time = start.elapsed();
    let (o5, d5) = timed(|| table_reproduction(&sweep));
    record(5, "reference table corner cells", 180, (o5, d5 + sweep_time));
    let (o6, d6) = timed(|| sweep_structure(&sweep, initial_spreaders));
    record(6, "sweep structure", 300, (o6, d6 + sweep_time));

    record(7, "growth and Lipschitz bounds", 10, timed(growth_and_lipschitz));
    record(8, "second-moment envelope", 60, timed(non_explosion));
    record(9, "CLI determinism", 600, timed(cli_determinism));

    let mut failed = 0;
    for (n, name, o, elapsed, budget) in &results {
        let pass = o.pass && elapsed <= budget;
        failed += usize::from(!pass);
        let timing = if elapsed <= budget {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s OVER BUDGET {}s", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!(
            "criterion {n} [{name}]: {} ({}; {timing})",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
