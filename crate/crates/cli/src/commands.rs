//! Subcommand drivers. Each writes its files into the output directory and
//! returns their paths in the order written.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::warn;

use infodemic_core::ablation::{read_sweep_csv, ReferenceTable};
use infodemic_core::export::{
    fmt_sig9, write_decay_report, write_deviation_report, write_metrics, write_metrics_aggregate,
    write_summary, write_sweep, write_trajectory,
};
use infodemic_core::noise::derive_seed;
use infodemic_core::{
    compare_to_reference, integrate, reproduction_number, run_ensemble, run_sweep,
    simulate_linearized, stochastic_margin, Compartment, EnsembleSummary, SweepResult, Trajectory,
};

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::svg::{render_svg, Band, Chart, Series};

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// Collects written paths under one directory.
pub struct Outputs {
    dir: PathBuf,
    format: Format,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn into_paths(self) -> Vec<PathBuf> {
        self.written
    }

    fn write<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let io_err = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w)?;
        w.flush().map_err(io_err)?;
        self.written.push(path);
        Ok(())
    }

    fn csv<F>(&mut self, name: &str, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> infodemic_core::Result<()>,
    {
        if !self.format.csv() {
            return Ok(());
        }
        self.write(name, |w| body(w).map_err(CliError::from))
    }

    fn svg(&mut self, name: &str, chart: impl FnOnce() -> Chart) -> Result<(), CliError> {
        if !self.format.svg() {
            return Ok(());
        }
        let doc = render_svg(&chart())?;
        self.text(name, &doc)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        self.write(name, |w| {
            w.write_all(body.as_bytes())
                .map_err(|source| CliError::Io { path, source })
        })
    }

    fn echo(&mut self, config: &RunConfig) -> Result<(), CliError> {
        self.text(EFFECTIVE_CONFIG, &config.clone().resolve().to_toml())
    }
}

fn start(config: &RunConfig) -> Result<Outputs, CliError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(CliError::Invalid(violations));
    }
    let mut out = Outputs::create(&config.output.dir, config.output.format)?;
    out.echo(config)?;
    Ok(out)
}

fn compartment_chart(title: &str, times: &[f64], rows: &[[f64; 6]]) -> Chart {
    Chart {
        title: title.into(),
        x_label: "t".into(),
        y_label: "population fraction".into(),
        series: Compartment::ALL
            .iter()
            .map(|c| Series {
                label: c.label().into(),
                x: times.to_vec(),
                y: rows.iter().map(|r| r[c.index()]).collect(),
                band: None,
            })
            .collect(),
    }
}

/// A single path; its seed is the one run 0 of an ensemble would use.
pub fn simulate(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = start(config)?;
    let p = config.params();
    let seed = derive_seed(config.ensemble.seed, 0);
    let t: Trajectory = integrate(&p, &config.history()?, &config.integrator(), seed)?;
    if t.projection_events > 0 {
        warn!("positivity projection clamped {} steps", t.projection_events);
    }
    out.csv("trajectory.csv", |w| write_trajectory(w, &t))?;
    out.svg("trajectory.svg", || {
        let rows: Vec<[f64; 6]> = t.states.iter().map(|s| s.0).collect();
        compartment_chart("Single trajectory", &t.times, &rows)
    })?;
    Ok(out.into_paths())
}

fn spreader_chart(s: &EnsembleSummary) -> Chart {
    let k = Compartment::Spreader.index();
    let band = s.spread.as_ref().map(|sp| Band {
        lower: sp.lower.iter().map(|r| r[k]).collect(),
        upper: sp.upper.iter().map(|r| r[k]).collect(),
    });
    Chart {
        title: format!(
            "Mean spreaders over {} runs ({}% band)",
            s.run_count,
            fmt_sig9(s.ci_level * 100.0)
        ),
        x_label: "t".into(),
        y_label: "I(t)".into(),
        series: vec![Series {
            label: "mean I".into(),
            x: s.times.clone(),
            y: s.mean_of(k),
            band,
        }],
    }
}

pub fn ensemble(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = start(config)?;
    let p = config.params();
    let result = run_ensemble(
        &p,
        &config.history()?,
        &config.integrator(),
        &config.ensemble_options(),
    )?;
    out.csv("summary.csv", |w| write_summary(w, &result.summary))?;
    out.csv("metrics.csv", |w| write_metrics(w, &result.metrics))?;
    out.csv("metrics_aggregate.csv", |w| {
        write_metrics_aggregate(w, &result.metrics)
    })?;
    out.svg("spreaders.svg", || spreader_chart(&result.summary))?;
    out.svg("compartments.svg", || {
        compartment_chart("Ensemble means", &result.summary.times, &result.summary.mean)
    })?;
    Ok(out.into_paths())
}

pub fn stability(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = start(config)?;
    let p = config.params();
    let r0 = reproduction_number(&p)?;
    let margin = stochastic_margin(&p)?;
    let s = &config.stability;
    let report = simulate_linearized(
        &p,
        s.e0,
        s.i0,
        &config.stability_integrator(),
        s.runs,
        config.ensemble.seed,
    )?;
    let regime = if r0 < 1.0 {
        "subcritical"
    } else if r0 > 1.0 {
        "supercritical"
    } else {
        "critical"
    };
    out.csv("threshold.csv", |w| {
        writeln!(w, "quantity,value")?;
        writeln!(w, "R0,{}", fmt_sig9(r0))?;
        writeln!(w, "removal_rate,{}", fmt_sig9(p.removal_rate()))?;
        writeln!(w, "stochastic_margin,{}", fmt_sig9(margin))?;
        writeln!(w, "margin_positive,{}", u8::from(margin > 0.0))?;
        writeln!(w, "regime,{regime}")?;
        writeln!(w, "verdict,{}", report.verdict.as_str())?;
        Ok(())
    })?;
    out.csv("decay.csv", |w| write_decay_report(w, &report))?;
    out.svg("decay.svg", || Chart {
        title: format!("Linearized second moment ({})", report.verdict.as_str()),
        x_label: "t".into(),
        y_label: "log10 E[E^2 + I^2]".into(),
        series: vec![Series {
            label: "estimate".into(),
            x: report.times.clone(),
            y: report
                .estimate
                .iter()
                .map(|v| v.max(f64::MIN_POSITIVE).log10())
                .collect(),
            band: None,
        }],
    })?;
    Ok(out.into_paths())
}

fn sweep_chart(result: &SweepResult, title: &str, pick: fn(&infodemic_core::SweepCell) -> f64) -> Chart {
    let mut taus: Vec<f64> = Vec::new();
    for c in &result.cells {
        if !taus.contains(&c.tau) {
            taus.push(c.tau);
        }
    }
    Chart {
        title: title.into(),
        x_label: "R0".into(),
        y_label: title.into(),
        series: taus
            .iter()
            .map(|&tau| {
                let row = result.row(tau);
                Series {
                    label: format!("tau = {}", fmt_sig9(tau)),
                    x: row.iter().map(|c| c.r0).collect(),
                    y: row.iter().map(|c| pick(c)).collect(),
                    band: None,
                }
            })
            .collect(),
    }
}

pub fn ablate(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = start(config)?;
    let result = run_sweep(&config.sweep_spec())?;
    if !result.horizon_warnings.is_empty() {
        warn!(
            "{} of {} cells have not extinguished by the horizon; they are listed in sweep.csv",
            result.horizon_warnings.len(),
            result.cells.len()
        );
    }
    out.csv("sweep.csv", |w| write_sweep(w, &result))?;
    out.svg("sweep_peak.svg", || sweep_chart(&result, "peak I mean", |c| c.peak_mean))?;
    out.svg("sweep_final.svg", || {
        sweep_chart(&result, "final size mean", |c| c.final_mean)
    })?;
    Ok(out.into_paths())
}

/// Reads `runs_per_cell` from the sweep file's metadata, if present.
fn runs_from_metadata(text: &str) -> Option<usize> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("runs_per_cell="))
        .and_then(|v| v.trim().parse().ok())
}

pub fn compare(
    config: &RunConfig,
    sweep: &Path,
    reference: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let mut out = start(config)?;
    let read = |path: &Path| {
        fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let text = read(sweep)?;
    let runs = runs_from_metadata(&text).unwrap_or(config.sweep.runs);
    let result = read_sweep_csv(text.as_bytes(), runs)?;
    let table = match reference {
        Some(path) => ReferenceTable::from_csv(read(path)?.as_bytes())?,
        None => ReferenceTable::published(),
    };
    let report = compare_to_reference(&result, &table)?;
    for c in report.flagged() {
        warn!(
            "tau = {}, R0 = {} outside the compatibility band",
            c.cell.tau, c.cell.r0
        );
    }
    // Deviation reports are CSV regardless of the requested format.
    out.write("deviation.csv", |w| {
        write_deviation_report(w, &report).map_err(CliError::from)
    })?;
    Ok(out.into_paths())
}

#[cfg(test)]
mod tests {
    use super::runs_from_metadata;

    #[test]
    fn metadata_runs() {
        assert_eq!(runs_from_metadata("# runs_per_cell=20\ntau,R0\n"), Some(20));
        assert_eq!(runs_from_metadata("tau,R0\n# runs_per_cell=20\n"), None);
    }
}
