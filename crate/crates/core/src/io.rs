//! CSV datasets, JSON reports and JSON-lines training histories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::{Dataset, TreatmentKind};
use crate::dml::EstimateReport;
use crate::error::{Error, Result};
use crate::training::HistoryEntry;

/// Read a `y,d,z1..zK` CSV file.
pub fn load_dataset(path: impl AsRef<Path>, kind: TreatmentKind) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "y" || cols[1] != "d" {
        return Err(Error::Parse { line: 1, msg: "header must start with y,d".into() });
    }
    for (k, name) in cols[2..].iter().enumerate() {
        if *name != format!("z{}", k + 1) {
            return Err(Error::Parse { line: 1, msg: format!("expected column z{}, found {name}", k + 1) });
        }
    }
    let dz = cols.len() - 2;
    let (mut y, mut d, mut z) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse { line, msg: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dz + 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", dz + 2, record.len()),
            });
        }
        let mut vals = record.iter().map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse { line, msg: format!("bad number {f:?}: {e}") })
        });
        y.push(vals.next().unwrap()?);
        let dv = vals.next().unwrap()?;
        if kind == TreatmentKind::Binary && dv != 1.0 && dv != -1.0 {
            return Err(Error::Validation(format!("line {line}: binary treatment must be -1 or 1, found {dv}")));
        }
        d.push(dv);
        for v in vals {
            z.push(v?);
        }
    }
    Dataset::new(y, d, z, dz, kind)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend((1..=ds.dz()).map(|k| format!("z{k}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(ds.dz() + 2);
    for i in 0..ds.n() {
        row.clear();
        row.push(ds.y(i).to_string());
        row.push(ds.d(i).to_string());
        row.extend(ds.z(i).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn report_json(report: &EstimateReport) -> Result<String> {
    report.check_finite()?;
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn save_report(report: &EstimateReport, path: impl AsRef<Path>) -> Result<()> {
    let text = report_json(report)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn write_history(history: &[HistoryEntry], mut out: impl Write) -> Result<()> {
    for entry in history {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_history(history: &[HistoryEntry], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_history(history, &mut w)?;
    w.flush()?;
    Ok(())
}
