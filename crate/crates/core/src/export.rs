//! CSV writers. Comma separated, `\n` line endings, one header row;
//! `#` metadata lines only ever precede the header. Numbers carry nine
//! significant digits.

use std::io::Write;

use crate::ablation::{DeviationReport, SweepResult};
use crate::engine::Trajectory;
use crate::ensemble::{EnsembleSummary, OutbreakMetrics};
use crate::error::Result;
use crate::model::Compartment;
use crate::stability::MeanSquareDecayReport;

/// Formats with nine significant digits, like C's `%.9g`.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // Let the scientific formatter do the rounding, then pick the layout.
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn metadata<W: Write>(out: &mut W, lines: &[String]) -> Result<()> {
    for line in lines {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_sig9).collect()
}

/// `t,S,E,I,R,Ig,F`.
pub fn write_trajectory<W: Write>(out: W, t: &Trajectory) -> Result<()> {
    let mut w = writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(Compartment::ALL.iter().map(|c| c.label().to_string()));
    w.write_record(&header)?;
    for (time, s) in t.times.iter().zip(&t.states) {
        w.write_record(row(std::iter::once(*time).chain(s.0)))?;
    }
    w.flush()?;
    Ok(())
}

/// `t,<c>_mean,<c>_std,<c>_lo,<c>_hi` for every compartment. Single-run
/// summaries have no spread; their std/lo/hi columns are left empty.
pub fn write_summary<W: Write>(mut out: W, s: &EnsembleSummary) -> Result<()> {
    metadata(
        &mut out,
        &[
            format!("runs={}", s.run_count),
            format!("ci_level={}", s.ci_level),
            format!("ci_method={:?}", s.ci_method).to_lowercase(),
        ],
    )?;
    let mut w = writer(out);
    let mut header = vec!["t".to_string()];
    for c in Compartment::ALL {
        for suffix in ["mean", "std", "lo", "hi"] {
            header.push(format!("{}_{suffix}", c.label()));
        }
    }
    w.write_record(&header)?;
    for (j, time) in s.times.iter().enumerate() {
        let mut record = vec![fmt_sig9(*time)];
        for k in 0..Compartment::ALL.len() {
            record.push(fmt_sig9(s.mean[j][k]));
            match &s.spread {
                Some(sp) => {
                    record.push(fmt_sig9(sp.std[j][k]));
                    record.push(fmt_sig9(sp.lower[j][k]));
                    record.push(fmt_sig9(sp.upper[j][k]));
                }
                None => record.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// `run,peak_I,peak_t,final_size`.
pub fn write_metrics<W: Write>(out: W, m: &OutbreakMetrics) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["run", "peak_I", "peak_t", "final_size"])?;
    for (k, ((peak, time), size)) in m.peak.iter().zip(&m.peak_time).zip(&m.final_size).enumerate() {
        w.write_record([k.to_string(), fmt_sig9(*peak), fmt_sig9(*time), fmt_sig9(*size)])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,mean,std` aggregate rows.
pub fn write_metrics_aggregate<W: Write>(out: W, m: &OutbreakMetrics) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["metric", "mean", "std"])?;
    w.write_record(["peak_I", &fmt_sig9(m.peak_mean), &fmt_sig9(m.peak_std)])?;
    w.write_record(["peak_t", &fmt_sig9(m.peak_time_mean), &fmt_sig9(m.peak_time_std)])?;
    w.write_record(["final_size", &fmt_sig9(m.final_size_mean), &fmt_sig9(m.final_size_std)])?;
    w.write_record(["mean_trajectory_peak_I", &fmt_sig9(m.mean_trajectory_peak), ""])?;
    w.write_record(["mean_trajectory_peak_t", &fmt_sig9(m.mean_trajectory_peak_time), ""])?;
    w.flush()?;
    Ok(())
}

/// `t,ms_estimate`, preceded by margin/verdict/rate metadata.
pub fn write_decay_report<W: Write>(mut out: W, r: &MeanSquareDecayReport) -> Result<()> {
    metadata(
        &mut out,
        &[
            format!("R0={}", fmt_sig9(r.r0)),
            format!("margin={}", fmt_sig9(r.margin)),
            format!("verdict={}", r.verdict.as_str()),
            format!(
                "fitted_rate={}",
                r.fitted_rate.map(fmt_sig9).unwrap_or_else(|| "none".into())
            ),
            format!("runs={}", r.run_count),
        ],
    )?;
    let mut w = writer(out);
    w.write_record(["t", "ms_estimate"])?;
    for (t, v) in r.times.iter().zip(&r.estimate) {
        w.write_record([fmt_sig9(*t), fmt_sig9(*v)])?;
    }
    w.flush()?;
    Ok(())
}

const SWEEP_HEADER: [&str; 7] = [
    "tau",
    "R0",
    "beta",
    "peak_mean",
    "peak_std",
    "final_mean",
    "final_std",
];

/// `tau,R0,beta,peak_mean,peak_std,final_mean,final_std`.
pub fn write_sweep<W: Write>(mut out: W, s: &SweepResult) -> Result<()> {
    let mut meta = vec![format!("runs_per_cell={}", s.runs_per_cell)];
    for (tau, r0) in &s.horizon_warnings {
        meta.push(format!(
            "warning: tau={} R0={} mean I(T) not extinguished",
            fmt_sig9(*tau),
            fmt_sig9(*r0)
        ));
    }
    metadata(&mut out, &meta)?;
    let mut w = writer(out);
    w.write_record(SWEEP_HEADER)?;
    for c in &s.cells {
        w.write_record(row([
            c.tau,
            c.r0,
            c.beta,
            c.peak_mean,
            c.peak_std,
            c.final_mean,
            c.final_std,
        ]))?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep columns followed by reference values, relative deviations and the
/// flag; each flagged cell's explanation is a `#` line above the header.
pub fn write_deviation_report<W: Write>(mut out: W, d: &DeviationReport) -> Result<()> {
    let mut meta = vec![
        format!("runs_per_cell={}", d.runs_per_cell),
        "flag rule: |mean - reference mean| > 3 reference std / sqrt(runs) + reference std".to_string(),
    ];
    for c in d.flagged() {
        meta.push(format!(
            "flagged tau={} R0={}: {}",
            fmt_sig9(c.cell.tau),
            fmt_sig9(c.cell.r0),
            c.explanation.as_deref().unwrap_or("")
        ));
    }
    metadata(&mut out, &meta)?;
    let mut w = writer(out);
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    header.extend([
        "paper_peak_mean",
        "paper_peak_std",
        "paper_final_mean",
        "paper_final_std",
        "peak_dev_rel",
        "final_dev_rel",
        "flag",
    ]);
    w.write_record(&header)?;
    for c in &d.cells {
        let mut record = row([
            c.cell.tau,
            c.cell.r0,
            c.cell.beta,
            c.cell.peak_mean,
            c.cell.peak_std,
            c.cell.final_mean,
            c.cell.final_std,
            c.reference.peak_mean,
            c.reference.peak_std,
            c.reference.final_mean,
            c.reference.final_std,
            c.peak_dev_rel,
            c.final_dev_rel,
        ]);
        record.push(u8::from(c.flagged()).to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
