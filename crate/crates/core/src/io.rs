//! CSV and JSON export of traces, sequences and reports.
//!
//! Trace CSV columns: `t_s,gamma` plus `stderr` when bin error bars exist.
//! Lines starting with `#` are ignored on input.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DecoherenceTrace, Method, Normalization};
use crate::error::{Error, Result};
use crate::sequences::PulseSequence;
use crate::spectra::{EnvironmentSpec, NoiseModel};

pub fn write_trace_csv<W: Write>(mut out: W, trace: &DecoherenceTrace) -> Result<()> {
    let stderr = trace.stderr();
    writeln!(out, "{}", if stderr.is_some() { "t_s,gamma,stderr" } else { "t_s,gamma" })?;
    for (i, (t, g)) in trace.grid().iter().zip(trace.values()).enumerate() {
        match stderr {
            Some(e) => writeln!(out, "{t:e},{g:e},{:e}", e[i])?,
            None => writeln!(out, "{t:e},{g:e}")?,
        }
    }
    Ok(())
}

/// Parse a trace CSV; `stderr` columns are read but not attached.
pub fn read_trace_csv<R: Read>(input: R, method: Method) -> Result<DecoherenceTrace> {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            header_seen = true;
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() < 2 || cols[0] != "t_s" || cols[1] != "gamma" {
                return Err(Error::Parse(format!(
                    "line {}: expected header `t_s,gamma[,stderr]`, got `{line}`",
                    lineno + 1
                )));
            }
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let mut field = |name: &str| -> Result<f64> {
            let raw = cols
                .next()
                .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", lineno + 1)))?;
            raw.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad {name} `{raw}`", lineno + 1)))
        };
        grid.push(field("t_s")?);
        values.push(field("gamma")?);
    }
    if !header_seen {
        return Err(Error::Parse("empty trace file".into()));
    }
    DecoherenceTrace::new(grid, values, method)
}

/// A trace with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub version: String,
    pub trace: DecoherenceTrace,
    pub sequence: PulseSequence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
}

impl TraceDocument {
    pub fn new(trace: DecoherenceTrace, sequence: PulseSequence) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            trace,
            sequence,
            environment: None,
            normalization: None,
            noise: None,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

pub fn write_trace_file(path: &Path, trace: &DecoherenceTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace_csv(&mut w, trace)?;
    w.flush()?;
    Ok(())
}

pub fn read_trace_file(path: &Path, method: Method) -> Result<DecoherenceTrace> {
    read_trace_csv(File::open(path)?, method)
}

/// Header line plus rows, values in shortest round-trip form.
pub fn write_table<W: Write>(mut out: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_table(&mut w, header, rows)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let tr = DecoherenceTrace::new(
            vec![0.0, 1.0 / 3.0, 0.7],
            vec![1.0, 0.123456789012345678, 1e-300],
            Method::Comb,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_s,gamma\n"));
        let back = read_trace_csv(&buf[..], Method::Comb).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(read_trace_csv(&b""[..], Method::Comb), Err(Error::Parse(_))));
        assert!(matches!(
            read_trace_csv(&b"time,g\n0,1\n"[..], Method::Comb),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_trace_csv(&b"t_s,gamma\n0,x\n"[..], Method::Comb),
            Err(Error::Parse(_))
        ));
        let ok = read_trace_csv(&b"# note\nt_s,gamma,stderr\n0,1,0\n1,0.5,0.1\n"[..], Method::MonteCarlo)
            .unwrap();
        assert_eq!(ok.values(), &[1.0, 0.5]);
    }

    #[test]
    fn json_document_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.json");
        let tr = DecoherenceTrace::new(vec![0.0, 1e-3], vec![1.0, 0.9], Method::ClosedForm).unwrap();
        let mut doc = TraceDocument::new(tr, PulseSequence::free(1e-3).unwrap());
        doc.environment = Some(EnvironmentSpec::standard(4.0, 10.0).unwrap());
        doc.normalization = Some(Normalization::standard());
        write_json(&path, &doc).unwrap();
        let back: TraceDocument = read_json(&path).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["n", "p"], &[vec![1.0, 0.5], vec![2.0, 0.25]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "n,p\n1e0,5e-1\n2e0,2.5e-1\n");
    }
}
