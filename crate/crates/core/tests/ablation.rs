use infodemic_core::ablation::{read_sweep_csv, ReferenceTable, REFERENCE_TABLE_CSV};
use infodemic_core::export::{write_deviation_report, write_sweep};
use infodemic_core::{compare_to_reference, run_sweep, SweepSpec};

fn small_spec(seed: u64) -> SweepSpec {
    SweepSpec {
        taus: vec![0.0, 10.0],
        r0s: vec![0.5, 2.0],
        runs_per_cell: 20,
        ..SweepSpec::reference(seed).unwrap()
    }
}

#[test]
fn record_count_matches_grid_and_order_is_row_major() {
    let r = run_sweep(&small_spec(1)).unwrap();
    assert_eq!(r.cells.len(), 4);
    let coords: Vec<(f64, f64)> = r.cells.iter().map(|c| (c.tau, c.r0)).collect();
    assert_eq!(coords, [(0.0, 0.5), (0.0, 2.0), (10.0, 0.5), (10.0, 2.0)]);
    for c in &r.cells {
        assert!((c.beta - c.r0 * 0.15).abs() < 1e-15);
    }
}

#[test]
fn sweep_is_deterministic_and_seed_sensitive() {
    let a = run_sweep(&small_spec(3)).unwrap();
    let b = run_sweep(&small_spec(3)).unwrap();
    let c = run_sweep(&small_spec(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.cells, c.cells);
}

#[test]
fn outbreak_grows_with_reproduction_number() {
    let r = run_sweep(&small_spec(5)).unwrap();
    for tau in [0.0, 10.0] {
        let low = r.cell(tau, 0.5).unwrap();
        let high = r.cell(tau, 2.0).unwrap();
        assert!(high.peak_mean > low.peak_mean);
        assert!(high.final_mean > low.final_mean);
    }
}

#[test]
fn sweep_csv_round_trips_through_the_reader() {
    let r = run_sweep(&small_spec(6)).unwrap();
    let mut buf = Vec::new();
    write_sweep(&mut buf, &r).unwrap();
    let back = read_sweep_csv(buf.as_slice(), r.runs_per_cell).unwrap();
    for (a, b) in r.cells.iter().zip(&back.cells) {
        for (x, y) in [
            (a.peak_mean, b.peak_mean),
            (a.peak_std, b.peak_std),
            (a.final_mean, b.final_mean),
            (a.final_std, b.final_std),
        ] {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn published_table_compared_with_itself_has_no_flags() {
    let table = ReferenceTable::published();
    let as_result = read_sweep_csv(REFERENCE_TABLE_CSV.as_bytes(), 100).unwrap();
    let report = compare_to_reference(&as_result, &table).unwrap();
    assert_eq!(report.cells.len(), 18);
    assert_eq!(report.flagged().count(), 0);
    let mut buf = Vec::new();
    write_deviation_report(&mut buf, &report).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.ends_with("peak_dev_rel,final_dev_rel,flag"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",0")).count(), 18);
}

#[test]
fn grid_mismatch_is_reported() {
    let r = run_sweep(&small_spec(7)).unwrap();
    let mut table_csv = String::from("tau,R0,beta,peak_mean,peak_std,final_mean,final_std\n");
    table_csv.push_str("0,0.5,0.075,0.005,0.0001,0.02,0.002\n");
    let partial = ReferenceTable::from_csv(table_csv.as_bytes()).unwrap();
    assert!(compare_to_reference(&r, &partial).is_err());
}
