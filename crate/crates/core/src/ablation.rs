//! Delay x reproduction-number sweeps and comparison with published values.

use std::io::Read;

use crate::engine::IntegratorConfig;
use crate::ensemble::{run_ensemble, CiMethod, EnsembleOptions, MergeMode};
use crate::error::{Error, Result, Violation};
use crate::model::{HistoryFunction, ModelParams, StateVector};
use crate::noise::derive_seed;

/// Published ablation table (delay 0/5/10 x R0 0.5..2.0, 100 runs per cell).
pub const REFERENCE_TABLE_CSV: &str = include_str!("../data/table1.csv");

/// Runs per cell behind [`REFERENCE_TABLE_CSV`].
pub const REFERENCE_RUNS: usize = 100;

pub const DEFAULT_TAUS: [f64; 3] = [0.0, 5.0, 10.0];
pub const DEFAULT_R0S: [f64; 6] = [0.5, 0.8, 1.0, 1.2, 1.5, 2.0];

/// Grid coordinates compare equal within this absolute tolerance.
const GRID_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub taus: Vec<f64>,
    pub r0s: Vec<f64>,
    pub runs_per_cell: usize,
    pub base_seed: u64,
    /// Everything except `beta` and `tau`, which each cell sets.
    pub template: ModelParams,
    /// Held constant over `[-tau, 0]` in every cell.
    pub initial: StateVector,
    pub integrator: IntegratorConfig,
    pub ci_level: f64,
    pub ci_method: CiMethod,
}

impl SweepSpec {
    /// The published grid with reference parameters, default start and integrator.
    pub fn reference(base_seed: u64) -> Result<Self> {
        let template = ModelParams::reference();
        let initial = HistoryFunction::default_for(&template)?.initial_state();
        Ok(SweepSpec {
            taus: DEFAULT_TAUS.to_vec(),
            r0s: DEFAULT_R0S.to_vec(),
            runs_per_cell: REFERENCE_RUNS,
            base_seed,
            template,
            initial,
            integrator: IntegratorConfig::default(),
            ci_level: 0.95,
            ci_method: CiMethod::Quantile,
        })
    }

    /// `beta = R0 (gamma + rho) / N`.
    pub fn beta_for(&self, r0: f64) -> f64 {
        r0 * self.template.removal_rate() / self.template.population
    }

    pub fn validate(&self) -> Result<()> {
        let mut out = Vec::new();
        if self.taus.is_empty() || self.r0s.is_empty() {
            out.push(Violation::new("sweep", "grid must be non-empty"));
        }
        for (k, &r0) in self.r0s.iter().enumerate() {
            let beta = self.beta_for(r0);
            if !(beta.is_finite() && beta > 0.0) {
                out.push(Violation::new(
                    format!("sweep.r0s[{k}]"),
                    format!("derived beta must be positive, got {beta}"),
                ));
            }
        }
        for (k, &tau) in self.taus.iter().enumerate() {
            if !(tau.is_finite() && tau >= 0.0) {
                out.push(Violation::new(
                    format!("sweep.taus[{k}]"),
                    format!("must be non-negative, got {tau}"),
                ));
            }
        }
        if self.runs_per_cell == 0 {
            out.push(Violation::new("sweep.runs", "must be at least 1"));
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(out))
        }
    }

    /// Seed of cell `(tau_index, r0_index)`; runs inside the cell derive from it.
    pub fn cell_seed(&self, tau_index: usize, r0_index: usize) -> u64 {
        derive_seed(derive_seed(self.base_seed, tau_index as u64), r0_index as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub tau: f64,
    pub r0: f64,
    pub beta: f64,
    pub peak_mean: f64,
    pub peak_std: f64,
    pub final_mean: f64,
    pub final_std: f64,
}

impl SweepCell {
    fn matches(&self, tau: f64, r0: f64) -> bool {
        (self.tau - tau).abs() <= GRID_MATCH && (self.r0 - r0).abs() <= GRID_MATCH
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Row-major: all `R0` values for the first `tau`, then the next `tau`.
    pub cells: Vec<SweepCell>,
    pub runs_per_cell: usize,
    /// Cells whose horizon did not extinguish the mean spreader mass.
    pub horizon_warnings: Vec<(f64, f64)>,
}

impl SweepResult {
    pub fn cell(&self, tau: f64, r0: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.matches(tau, r0))
    }

    /// Cells at one delay, in grid order.
    pub fn row(&self, tau: f64) -> Vec<&SweepCell> {
        self.cells
            .iter()
            .filter(|c| (c.tau - tau).abs() <= GRID_MATCH)
            .collect()
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.taus.len() * spec.r0s.len());
    let mut horizon_warnings = Vec::new();
    for (ti, &tau) in spec.taus.iter().enumerate() {
        for (ri, &r0) in spec.r0s.iter().enumerate() {
            let mut p = spec.template.with_tau(tau);
            p.beta = spec.beta_for(r0);
            let wrap = |e: Error| Error::Cell {
                tau,
                r0,
                source: Box::new(e),
            };
            let history = HistoryFunction::constant(spec.initial, p.population).map_err(wrap)?;
            let opts = EnsembleOptions {
                run_count: spec.runs_per_cell,
                base_seed: spec.cell_seed(ti, ri),
                ci_level: spec.ci_level,
                ci_method: spec.ci_method,
                retain_trajectories: false,
                merge: MergeMode::Sequential,
            };
            let out = run_ensemble(&p, &history, &spec.integrator, &opts).map_err(wrap)?;
            if out.horizon_warning {
                horizon_warnings.push((tau, r0));
            }
            let m = &out.metrics;
            cells.push(SweepCell {
                tau,
                r0,
                beta: p.beta,
                peak_mean: m.peak_mean,
                peak_std: m.peak_std,
                final_mean: m.final_size_mean,
                final_std: m.final_size_std,
            });
        }
    }
    Ok(SweepResult {
        cells,
        runs_per_cell: spec.runs_per_cell,
        horizon_warnings,
    })
}

/// Reference values for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub tau: f64,
    pub r0: f64,
    pub beta: f64,
    pub peak_mean: f64,
    pub peak_std: f64,
    pub final_mean: f64,
    pub final_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub cells: Vec<ReferenceCell>,
}

impl ReferenceTable {
    /// The shipped table.
    pub fn published() -> Self {
        Self::from_csv(REFERENCE_TABLE_CSV.as_bytes()).expect("shipped reference table parses")
    }

    /// Parses `tau,R0,beta,peak_mean,peak_std,final_mean,final_std` rows;
    /// `#` lines are skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let cells = read_cells(reader)?
            .into_iter()
            .map(|r| ReferenceCell {
                tau: r.tau,
                r0: r.r0,
                beta: r.beta,
                peak_mean: r.peak_mean,
                peak_std: r.peak_std,
                final_mean: r.final_mean,
                final_std: r.final_std,
            })
            .collect();
        Ok(ReferenceTable { cells })
    }

    pub fn cell(&self, tau: f64, r0: f64) -> Option<&ReferenceCell> {
        self.cells
            .iter()
            .find(|c| (c.tau - tau).abs() <= GRID_MATCH && (c.r0 - r0).abs() <= GRID_MATCH)
    }
}

/// Reads a sweep result previously written by `export::write_sweep`.
pub fn read_sweep_csv<R: Read>(reader: R, runs_per_cell: usize) -> Result<SweepResult> {
    let cells = read_cells(reader)?
        .into_iter()
        .map(|r| SweepCell {
            tau: r.tau,
            r0: r.r0,
            beta: r.beta,
            peak_mean: r.peak_mean,
            peak_std: r.peak_std,
            final_mean: r.final_mean,
            final_std: r.final_std,
        })
        .collect();
    Ok(SweepResult {
        cells,
        runs_per_cell,
        horizon_warnings: Vec::new(),
    })
}

/// One parsed `tau,R0,beta,peak_mean,peak_std,final_mean,final_std` row.
struct CellRow {
    tau: f64,
    r0: f64,
    beta: f64,
    peak_mean: f64,
    peak_std: f64,
    final_mean: f64,
    final_std: f64,
}

const CELL_COLUMNS: [&str; 7] = [
    "tau",
    "R0",
    "beta",
    "peak_mean",
    "peak_std",
    "final_mean",
    "final_std",
];

fn read_cells<R: Read>(reader: R) -> Result<Vec<CellRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 7];
    for (slot, name) in index.iter_mut().zip(CELL_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid("csv header", format!("missing column `{name}`")))?;
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let mut v = [0.0; 7];
        for (slot, (&col, name)) in v.iter_mut().zip(index.iter().zip(CELL_COLUMNS)) {
            let raw = record.get(col).unwrap_or("");
            *slot = raw.parse().map_err(|_| {
                Error::invalid(
                    format!("row {}.{name}", line + 1),
                    format!("not a number: `{raw}`"),
                )
            })?;
        }
        rows.push(CellRow {
            tau: v[0],
            r0: v[1],
            beta: v[2],
            peak_mean: v[3],
            peak_std: v[4],
            final_mean: v[5],
            final_std: v[6],
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDeviation {
    pub cell: SweepCell,
    pub reference: ReferenceCell,
    /// `(mean - reference) / reference`.
    pub peak_dev_rel: f64,
    pub final_dev_rel: f64,
    pub peak_flagged: bool,
    pub final_flagged: bool,
    /// Why the cell was flagged; `None` for unflagged cells.
    pub explanation: Option<String>,
}

impl CellDeviation {
    pub fn flagged(&self) -> bool {
        self.peak_flagged || self.final_flagged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub cells: Vec<CellDeviation>,
    pub runs_per_cell: usize,
}

impl DeviationReport {
    pub fn flagged(&self) -> impl Iterator<Item = &CellDeviation> {
        self.cells.iter().filter(|c| c.flagged())
    }

    pub fn cell(&self, tau: f64, r0: f64) -> Option<&CellDeviation> {
        self.cells.iter().find(|c| c.cell.matches(tau, r0))
    }
}

/// Half-width of the compatibility band around a reference mean:
/// `3 std / sqrt(runs) + std`.
pub fn compatibility_band(reference_std: f64, runs: usize) -> f64 {
    3.0 * reference_std / (runs as f64).sqrt() + reference_std
}

/// Why reproduced and published values can disagree.
pub const DEVIATION_CAUSE: &str = "only tau, R0 and beta are published for this table; \
     sigma_act, theta, the gamma/rho split, noise intensities and the initial \
     condition are assumed defaults";

/// Per-cell relative deviations; a cell is flagged when either mean lies
/// outside `reference +/- compatibility_band`.
pub fn compare_to_reference(result: &SweepResult, reference: &ReferenceTable) -> Result<DeviationReport> {
    if result.cells.len() != reference.cells.len() {
        return Err(Error::GridMismatch(format!(
            "result has {} cells, reference has {}",
            result.cells.len(),
            reference.cells.len()
        )));
    }
    let mut cells = Vec::with_capacity(result.cells.len());
    for c in &result.cells {
        let r = reference.cell(c.tau, c.r0).ok_or_else(|| {
            Error::GridMismatch(format!("no reference cell for tau = {}, R0 = {}", c.tau, c.r0))
        })?;
        let peak_band = compatibility_band(r.peak_std, result.runs_per_cell);
        let final_band = compatibility_band(r.final_std, result.runs_per_cell);
        let peak_flagged = (c.peak_mean - r.peak_mean).abs() > peak_band;
        let final_flagged = (c.final_mean - r.final_mean).abs() > final_band;
        let mut reasons = Vec::new();
        if peak_flagged {
            reasons.push(format!(
                "peak mean {:.5} outside {:.5} +/- {:.5}",
                c.peak_mean, r.peak_mean, peak_band
            ));
        }
        if final_flagged {
            reasons.push(format!(
                "final-size mean {:.4} outside {:.4} +/- {:.4}",
                c.final_mean, r.final_mean, final_band
            ));
        }
        let explanation =
            (!reasons.is_empty()).then(|| format!("{}; {}", reasons.join("; "), DEVIATION_CAUSE));
        cells.push(CellDeviation {
            cell: c.clone(),
            reference: *r,
            peak_dev_rel: (c.peak_mean - r.peak_mean) / r.peak_mean,
            final_dev_rel: (c.final_mean - r.final_mean) / r.final_mean,
            peak_flagged,
            final_flagged,
            explanation,
        });
    }
    Ok(DeviationReport {
        cells,
        runs_per_cell: result.runs_per_cell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_result(table: &ReferenceTable) -> SweepResult {
        SweepResult {
            cells: table
                .cells
                .iter()
                .map(|r| SweepCell {
                    tau: r.tau,
                    r0: r.r0,
                    beta: r.beta,
                    peak_mean: r.peak_mean,
                    peak_std: r.peak_std,
                    final_mean: r.final_mean,
                    final_std: r.final_std,
                })
                .collect(),
            runs_per_cell: REFERENCE_RUNS,
            horizon_warnings: Vec::new(),
        }
    }

    #[test]
    fn shipped_table_matches_transcription() {
        #[rustfmt::skip]
        let expected: [[f64; 7]; 18] = [
            [0.0, 0.5, 0.075, 0.00527, 0.00006, 0.0194, 0.0020],
            [0.0, 0.8, 0.120, 0.00544, 0.00007, 0.0465, 0.0085],
            [0.0, 1.0, 0.150, 0.00693, 0.00350, 0.1233, 0.0536],
            [0.0, 1.2, 0.180, 0.01618, 0.00784, 0.2988, 0.1191],
            [0.0, 1.5, 0.225, 0.04420, 0.01301, 0.5726, 0.1119],
            [0.0, 2.0, 0.300, 0.09704, 0.01714, 0.8105, 0.1062],
            [5.0, 0.5, 0.075, 0.00529, 0.00008, 0.0234, 0.0023],
            [5.0, 0.8, 0.120, 0.00541, 0.00009, 0.0526, 0.0095],
            [5.0, 1.0, 0.150, 0.00620, 0.00175, 0.1233, 0.0290],
            [5.0, 1.2, 0.180, 0.01331, 0.00540, 0.2641, 0.0844],
            [5.0, 1.5, 0.225, 0.03174, 0.01058, 0.5230, 0.1247],
            [5.0, 2.0, 0.300, 0.06572, 0.01270, 0.7445, 0.1110],
            [10.0, 0.5, 0.075, 0.00529, 0.00006, 0.0262, 0.0032],
            [10.0, 0.8, 0.120, 0.00540, 0.00007, 0.0595, 0.0129],
            [10.0, 1.0, 0.150, 0.00583, 0.00066, 0.1224, 0.0273],
            [10.0, 1.2, 0.180, 0.01130, 0.00440, 0.2337, 0.0592],
            [10.0, 1.5, 0.225, 0.02575, 0.00873, 0.4709, 0.1295],
            [10.0, 2.0, 0.300, 0.05448, 0.01315, 0.7429, 0.1261],
        ];
        let table = ReferenceTable::published();
        assert_eq!(table.cells.len(), 18);
        for (c, e) in table.cells.iter().zip(expected) {
            let got = [c.tau, c.r0, c.beta, c.peak_mean, c.peak_std, c.final_mean, c.final_std];
            assert_eq!(got, e);
        }
        // beta column is R0 * 0.15 for N = 1.
        for c in &table.cells {
            assert!((c.beta - 0.15 * c.r0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_result_has_no_deviation() {
        let table = ReferenceTable::published();
        let report = compare_to_reference(&as_result(&table), &table).unwrap();
        assert!(report.cells.iter().all(|c| c.peak_dev_rel == 0.0 && c.final_dev_rel == 0.0));
        assert_eq!(report.flagged().count(), 0);
    }

    #[test]
    fn single_perturbed_cell_is_flagged() {
        let table = ReferenceTable::published();
        let mut result = as_result(&table);
        result.cells[8].final_mean += 0.2;
        let report = compare_to_reference(&result, &table).unwrap();
        let flagged: Vec<_> = report.flagged().map(|c| (c.cell.tau, c.cell.r0)).collect();
        assert_eq!(flagged, [(5.0, 1.0)]);
        let cell = report.cell(5.0, 1.0).unwrap();
        assert!(cell.final_flagged && !cell.peak_flagged);
        assert!(cell.explanation.as_deref().unwrap().contains("final-size mean"));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let table = ReferenceTable::published();
        let mut result = as_result(&table);
        result.cells.pop();
        assert!(matches!(
            compare_to_reference(&result, &table),
            Err(Error::GridMismatch(_))
        ));
        let mut shifted = as_result(&table);
        shifted.cells[0].r0 = 0.55;
        assert!(compare_to_reference(&shifted, &table).is_err());
    }

    #[test]
    fn spec_validation_rejects_nonpositive_beta() {
        let mut spec = SweepSpec::reference(1).unwrap();
        spec.r0s.push(0.0);
        spec.taus.clear();
        let err = spec.validate().unwrap_err();
        assert_eq!(err.violations().len(), 2);
    }

    #[test]
    fn cell_seeds_are_distinct() {
        let spec = SweepSpec::reference(9).unwrap();
        let mut seeds: Vec<u64> = (0..3)
            .flat_map(|t| (0..6).map(move |r| (t, r)))
            .map(|(t, r)| spec.cell_seed(t, r))
            .collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 18);
    }
}
