//! CSV tables for event streams, estimates, smoothed curves and scans.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the identical `f64`.

use std::io::{Read, Write};

use crate::cls::{confidence_interval, HawkesFit, Target};
use crate::diagnostics::DiagnosticsReport;
use crate::error::{HawkesError, Result};
use crate::events::{EventStream, Window};
use crate::experiment::ReplicationReport;
use crate::selection::{AicScan, BinSizeScan};
use crate::smoothing::SmoothedExcitement;

fn parse_err(line: u64, msg: impl std::fmt::Display) -> HawkesError {
    HawkesError::Parse(format!("line {line}: {msg}"))
}

/// Raw `(component, timestamp)` rows with 0-based components.
pub fn read_event_rows<R: Read>(reader: R) -> Result<Vec<(usize, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let comp = record[0].parse::<usize>();
        if idx == 0 && comp.is_err() && record[1].parse::<f64>().is_err() {
            // header row
            continue;
        }
        let comp =
            comp.map_err(|_| parse_err(line, format!("bad component index {:?}", &record[0])))?;
        if comp == 0 {
            return Err(parse_err(line, "component indices are 1-based"));
        }
        let t = record[1]
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("bad timestamp {:?}", &record[1])))?;
        if !t.is_finite() {
            return Err(parse_err(line, "timestamp must be finite"));
        }
        rows.push((comp - 1, t));
    }
    Ok(rows)
}

/// Reads an event stream. Without an explicit window, `(0, max t]` is used
/// when all timestamps are positive; the dimension defaults to the largest index.
pub fn read_events_csv<R: Read>(
    reader: R,
    window: Option<Window>,
    dim: Option<usize>,
) -> Result<EventStream> {
    let rows = read_event_rows(reader)?;
    let seen = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let d = dim.unwrap_or(seen);
    if d == 0 {
        return Err(HawkesError::Parse(
            "no events and no dimension given".into(),
        ));
    }
    if seen > d {
        return Err(HawkesError::Parse(format!(
            "component index {seen} exceeds dimension {d}"
        )));
    }
    let window = match window {
        Some(w) => w,
        None => {
            let lo = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            if rows.is_empty() || lo <= 0.0 {
                return Err(HawkesError::InvalidParameter(
                    "observation window must be given when timestamps are not all positive".into(),
                ));
            }
            Window::new(0.0, hi)?
        }
    };
    let mut times = vec![Vec::new(); d];
    for (c, t) in rows {
        times[c].push(t);
    }
    EventStream::from_unsorted(times, window)
}

/// Writes `component,timestamp` rows in time order, 1-based components.
pub fn write_events_csv<W: Write>(writer: W, stream: &EventStream) -> Result<()> {
    let mut rows: Vec<(f64, usize)> = stream
        .components()
        .iter()
        .enumerate()
        .flat_map(|(c, ts)| ts.iter().map(move |&t| (t, c)))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["component", "timestamp"])?;
    for (t, c) in rows {
        w.write_record([(c + 1).to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `t, i, j, h, ci_low, ci_high` with `t = kΔ`.
pub fn write_estimates_csv<W: Write>(writer: W, fit: &HawkesFit, level: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "i", "j", "h", "ci_low", "ci_high"])?;
    let d = fit.dim();
    for k in 1..=fit.p() {
        let t = k as f64 * fit.delta();
        for i in 1..=d {
            for j in 1..=d {
                let target = Target::Excitation { k, i, j };
                let (h, lo, hi) = match fit.covariance() {
                    Some(_) => {
                        let ci = confidence_interval(fit, target, level)?;
                        (ci.point, ci.low().to_string(), ci.high().to_string())
                    }
                    None => (fit.value(target)?, String::new(), String::new()),
                };
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    j.to_string(),
                    h.to_string(),
                    lo,
                    hi,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `i, eta, ci_low, ci_high`; the interval columns are empty without a covariance.
pub fn write_baseline_csv<W: Write>(writer: W, fit: &HawkesFit, level: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "eta", "ci_low", "ci_high"])?;
    for i in 1..=fit.dim() {
        let target = Target::Baseline { i };
        let (eta, lo, hi) = match fit.covariance() {
            Some(_) => {
                let ci = confidence_interval(fit, target, level)?;
                (ci.point, ci.low().to_string(), ci.high().to_string())
            }
            None => (fit.value(target)?, String::new(), String::new()),
        };
        w.write_record([i.to_string(), eta.to_string(), lo, hi])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `replication, target, estimate, variance, covered`; `target` is the 1-based `vec` index.
pub fn write_replication_csv<W: Write>(
    writer: W,
    report: &ReplicationReport,
    d: usize,
    p: usize,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["replication", "target", "estimate", "variance", "covered"])?;
    for s in &report.samples {
        for (t, summary) in report.summaries.iter().enumerate() {
            w.write_record([
                s.replication.to_string(),
                summary.target.vec_index(d, p).to_string(),
                s.estimates[t].to_string(),
                s.variances[t].to_string(),
                s.covered[t].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `t, i, j, value` of the smoothed curves on the given evaluation grid.
pub fn write_smoothed_csv<W: Write>(
    writer: W,
    smoothed: &SmoothedExcitement,
    grid: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "i", "j", "value"])?;
    let d = smoothed.dim();
    for &t in grid {
        for i in 1..=d {
            for j in 1..=d {
                w.write_record([
                    t.to_string(),
                    i.to_string(),
                    j.to_string(),
                    smoothed.eval(i, j, t).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `p, s, aic`; degenerate candidates are written as `inf`.
pub fn write_aic_csv<W: Write>(writer: W, scan: &AicScan) -> Result<()> {
    write_aic_rows(writer, scan.delta0, &scan.candidates, &scan.aic)
}

/// Same layout as [`write_aic_csv`] for a raw AIC curve.
pub fn write_aic_rows<W: Write>(
    writer: W,
    delta0: f64,
    candidates: &[usize],
    aic: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["p", "s", "aic"])?;
    for (&p, &a) in candidates.iter().zip(aic) {
        w.write_record([
            p.to_string(),
            (p as f64 * delta0).to_string(),
            a.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `delta, p, i, eta, half_width, ci_low, ci_high`.
pub fn write_binsize_csv<W: Write>(writer: W, scan: &BinSizeScan) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["delta", "p", "i", "eta", "half_width", "ci_low", "ci_high"])?;
    for e in &scan.entries {
        for (i, (&eta, &hw)) in e.eta.iter().zip(&e.half_width).enumerate() {
            w.write_record([
                e.delta.to_string(),
                e.p.to_string(),
                (i + 1).to_string(),
                eta.to_string(),
                hw.to_string(),
                (eta - hw).to_string(),
                (eta + hw).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `component, empirical, theoretical`.
pub fn write_qq_csv<W: Write>(writer: W, report: &DiagnosticsReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["component", "empirical", "theoretical"])?;
    for c in &report.components {
        for &(e, t) in &c.qq {
            w.write_record([c.component.to_string(), e.to_string(), t.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
