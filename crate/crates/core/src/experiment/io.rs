//! CSV and gnuplot-style plot-data emission and parsing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::config::OutputFormat;
use super::fit::FitResult;
use super::run::FilterRow;
use super::trace::{CorrelationTrace, TracePoint, TraceStatus};

pub const TRACE_HEADER: [&str; 5] = ["state", "sequence", "time_s", "correlation", "std_error"];
pub const FIT_HEADER: [&str; 4] = ["sequence", "amplitude", "tau_s", "residual"];
pub const FILTER_HEADER: [&str; 7] = ["sequence", "bath", "chi", "coherence", "error_estimate", "rank", "status"];

/// Shortest text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Syntax {
        line,
        column: 0,
        message: e.to_string(),
    }
}

fn write_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Failed traces become one row with empty numeric fields.
pub fn write_traces_csv<W: Write>(traces: &[CorrelationTrace], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(write_err)?;
    for tr in traces {
        if !tr.is_ok() {
            w.write_record([tr.state.as_str(), tr.sequence.as_str(), "", "", ""])
                .map_err(write_err)?;
            continue;
        }
        for p in &tr.points {
            w.write_record([
                tr.state.clone(),
                tr.sequence.clone(),
                format_number(p.time),
                format_number(p.correlation),
                format_number(p.std_error),
            ])
            .map_err(write_err)?;
        }
    }
    w.flush()
}

/// Groups consecutive rows by `(state, sequence)`. Rows with empty numeric
/// fields mark a failed trace.
pub fn parse_traces_csv(text: &str) -> Result<Vec<CorrelationTrace>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::Syntax {
            line: 1,
            column: 1,
            message: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }
    let mut traces: Vec<CorrelationTrace> = Vec::new();
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let (state, sequence) = (&record[0], &record[1]);
        if record[2].is_empty() && record[3].is_empty() && record[4].is_empty() {
            traces.push(CorrelationTrace::failed(state, sequence, ""));
            continue;
        }
        let num = |k: usize| -> Result<f64> {
            record[k].parse::<f64>().map_err(|e| Error::Semantic {
                line,
                message: format!("{}: `{}`: {e}", TRACE_HEADER[k], &record[k]),
            })
        };
        let point = TracePoint {
            time: num(2)?,
            correlation: num(3)?,
            std_error: num(4)?,
        };
        match traces.last_mut() {
            Some(tr) if tr.is_ok() && tr.state == state && tr.sequence == sequence => tr.points.push(point),
            _ => traces.push(CorrelationTrace::new(state, sequence, vec![point])),
        }
    }
    Ok(traces)
}

/// One block per trace, separated by two blank lines (gnuplot `index`).
pub fn write_traces_plotdata<W: Write>(traces: &[CorrelationTrace], mut out: W) -> std::io::Result<()> {
    for (k, tr) in traces.iter().enumerate() {
        if k > 0 {
            writeln!(out, "\n")?;
        }
        match &tr.status {
            TraceStatus::Ok => writeln!(out, "# state={} sequence={} status=ok", tr.state, tr.sequence)?,
            TraceStatus::Failed(reason) => writeln!(
                out,
                "# state={} sequence={} status=failed reason={}",
                tr.state,
                tr.sequence,
                reason.replace('\n', " ")
            )?,
        }
        writeln!(out, "# time_s correlation std_error")?;
        for p in &tr.points {
            writeln!(
                out,
                "{} {} {}",
                format_number(p.time),
                format_number(p.correlation),
                format_number(p.std_error)
            )?;
        }
    }
    out.flush()
}

pub fn parse_traces_plotdata(text: &str) -> Result<Vec<CorrelationTrace>> {
    let mut traces: Vec<CorrelationTrace> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("# time_s") {
            continue;
        }
        if let Some(meta) = line.strip_prefix("# ") {
            let field = |key: &str| {
                meta.split(' ')
                    .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                    .map(str::to_string)
            };
            let (state, sequence, status) = match (field("state"), field("sequence"), field("status")) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(Error::Syntax {
                        line: line_no,
                        column: 1,
                        message: "block header needs state, sequence and status".into(),
                    })
                }
            };
            traces.push(if status == "ok" {
                CorrelationTrace::new(state, sequence, Vec::new())
            } else {
                let reason = meta.split_once("reason=").map(|(_, r)| r).unwrap_or("");
                CorrelationTrace::failed(state, sequence, reason)
            });
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Semantic {
                line: line_no,
                message: e.to_string(),
            })?;
        let tr = traces.last_mut().filter(|t| t.is_ok()).ok_or_else(|| Error::Semantic {
            line: line_no,
            message: "data outside an ok block".into(),
        })?;
        if values.len() != 3 {
            return Err(Error::Semantic {
                line: line_no,
                message: format!("expected 3 columns, got {}", values.len()),
            });
        }
        tr.points.push(TracePoint {
            time: values[0],
            correlation: values[1],
            std_error: values[2],
        });
    }
    Ok(traces)
}

pub fn write_fits_csv<W: Write>(fits: &[(String, FitResult)], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_HEADER).map_err(write_err)?;
    for (seq, fit) in fits {
        w.write_record([
            seq.clone(),
            format_number(fit.amplitude),
            format_number(fit.tau),
            format_number(fit.residual),
        ])
        .map_err(write_err)?;
    }
    w.flush()
}

pub fn write_fits_plotdata<W: Write>(fits: &[(String, FitResult)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "# sequence amplitude tau_s residual")?;
    for (seq, fit) in fits {
        writeln!(
            out,
            "{seq} {} {} {}",
            format_number(fit.amplitude),
            format_number(fit.tau),
            format_number(fit.residual)
        )?;
    }
    out.flush()
}

fn filter_status(row: &FilterRow) -> String {
    match &row.failure {
        None => "ok".into(),
        Some(reason) => format!("failed: {reason}"),
    }
}

pub fn write_filter_csv<W: Write>(rows: &[FilterRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FILTER_HEADER).map_err(write_err)?;
    for row in rows {
        w.write_record([
            row.sequence.clone(),
            row.bath.clone(),
            format_number(row.chi),
            format_number(row.coherence),
            format_number(row.error_estimate),
            row.rank.to_string(),
            filter_status(row),
        ])
        .map_err(write_err)?;
    }
    w.flush()
}

/// One block per bath.
pub fn write_filter_plotdata<W: Write>(rows: &[FilterRow], mut out: W) -> std::io::Result<()> {
    let mut first = true;
    let mut k = 0;
    while k < rows.len() {
        let bath = &rows[k].bath;
        if !first {
            writeln!(out, "\n")?;
        }
        first = false;
        writeln!(out, "# bath={bath}")?;
        writeln!(out, "# sequence chi coherence error_estimate rank status")?;
        while k < rows.len() && &rows[k].bath == bath {
            let r = &rows[k];
            writeln!(
                out,
                "{} {} {} {} {} {}",
                r.sequence,
                format_number(r.chi),
                format_number(r.coherence),
                format_number(r.error_estimate),
                r.rank,
                if r.failure.is_none() { "ok" } else { "failed" }
            )?;
            k += 1;
        }
    }
    out.flush()
}

fn with_file(path: &Path, write: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(traces: &[CorrelationTrace], path: &Path) -> Result<()> {
    with_file(path, |w| write_traces_csv(traces, w))
}

pub fn emit_plotdata(traces: &[CorrelationTrace], path: &Path) -> Result<()> {
    with_file(path, |w| write_traces_plotdata(traces, w))
}

pub fn emit_traces(traces: &[CorrelationTrace], path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => emit_csv(traces, path),
        OutputFormat::PlotData => emit_plotdata(traces, path),
    }
}

pub fn emit_fits(fits: &[(String, FitResult)], path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => with_file(path, |w| write_fits_csv(fits, w)),
        OutputFormat::PlotData => with_file(path, |w| write_fits_plotdata(fits, w)),
    }
}

pub fn emit_filter(rows: &[FilterRow], path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => with_file(path, |w| write_filter_csv(rows, w)),
        OutputFormat::PlotData => with_file(path, |w| write_filter_plotdata(rows, w)),
    }
}

/// Reads a trace file, choosing the parser from the content.
pub fn read_traces(path: &Path) -> Result<Vec<CorrelationTrace>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.starts_with("state,") {
        parse_traces_csv(&text)
    } else {
        parse_traces_plotdata(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_traces() -> Vec<CorrelationTrace> {
        let pts = |k: f64| {
            (0..5)
                .map(|i| TracePoint {
                    time: 0.1 * i as f64 + k,
                    correlation: (-(i as f64) / 3.7).exp() * 0.999_999_999_7,
                    std_error: 1.234e-17 * i as f64,
                })
                .collect::<Vec<_>>()
        };
        vec![
            CorrelationTrace::new("singlet", "none", pts(0.0)),
            CorrelationTrace::new("singlet", "UDD-1", pts(1.0 / 3.0)),
            CorrelationTrace::failed("singlet", "UDD-9", "pulse overlap at pulse 4"),
            CorrelationTrace::new("singlet", "CPMG-7", pts(1e-300)),
        ]
    }

    #[test]
    fn empty_list_gives_header_only() {
        let mut buf = Vec::new();
        write_traces_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "state,sequence,time_s,correlation,std_error\n");
        assert!(parse_traces_csv("state,sequence,time_s,correlation,std_error\n").unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let traces = sample_traces();
        let mut buf = Vec::new();
        write_traces_csv(&traces, &mut buf).unwrap();
        let back = parse_traces_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.len(), traces.len());
        for (a, b) in traces.iter().zip(&back) {
            assert_eq!((&a.state, &a.sequence), (&b.state, &b.sequence));
            assert_eq!(a.is_ok(), b.is_ok());
            assert_eq!(a.points, b.points);
        }
    }

    #[test]
    fn plotdata_holds_the_same_numbers() {
        let traces = sample_traces();
        let mut buf = Vec::new();
        write_traces_plotdata(&traces, &mut buf).unwrap();
        let back = parse_traces_plotdata(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, traces);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-5, 2.5e-300, 6.02e23, -7.25e-9, 0.9999999999999999] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_number(40.0), "40");
        assert_eq!(format_number(1e-7), "1e-7");
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_traces_csv("a,b\n").unwrap_err();
        assert!(err.to_string().contains("expected header"));
        let err = parse_traces_csv("state,sequence,time_s,correlation,std_error\nsinglet,none,0,x,0\n").unwrap_err();
        assert!(matches!(err, Error::Semantic { line: 2, .. }), "{err}");
        let err = parse_traces_plotdata("# state=a sequence=b status=ok\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Semantic { line: 2, .. }), "{err}");
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = emit_csv(&[], &blocker.join("out.csv")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
        let path = dir.path().join("nested/traces.csv");
        emit_csv(&sample_traces(), &path).unwrap();
        assert_eq!(read_traces(&path).unwrap().len(), 4);
        let err = read_traces(&dir.path().join("missing.csv")).unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }

    #[test]
    fn fit_and_filter_tables() {
        let fit = FitResult {
            amplitude: 0.8,
            tau: 6.1,
            residual: 0.0,
            covariance: [[0.0; 2]; 2],
        };
        let mut buf = Vec::new();
        write_fits_csv(&[("UDD-7".into(), fit)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sequence,amplitude,tau_s,residual\nUDD-7,0.8,6.1,0\n");
        let rows = vec![FilterRow {
            sequence: "UDD-7".into(),
            bath: "sharp".into(),
            chi: f64::NAN,
            coherence: f64::NAN,
            error_estimate: f64::NAN,
            rank: 0,
            failure: Some("no convergence, after 10 panels".into()),
        }];
        let mut buf = Vec::new();
        write_filter_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("UDD-7,sharp,NaN,NaN,NaN,0,\"failed: no convergence, after 10 panels\"\n"), "{text}");
    }
}
