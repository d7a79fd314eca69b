//! CSV and JSON files.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use geomext_core::diagnostics::{CurvePoint, LimitSetSurface};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

/// Reads a CSV file with a header row. Rows with an empty, missing or
/// non-numeric field are dropped and counted in the log.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if names.is_empty() {
        bail!("{}: no header row", path.display());
    }
    let mut rows = Vec::new();
    let mut dropped = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), i + 1))?;
        let parsed: Option<Vec<f64>> = if rec.len() == names.len() {
            rec.iter().map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite())).collect()
        } else {
            None
        };
        match parsed {
            Some(r) => rows.push(r),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} incomplete rows, kept {}", path.display(), rows.len());
    }
    if rows.is_empty() {
        bail!("{}: no complete rows", path.display());
    }
    Ok(Table { names, rows })
}

pub fn write_table(path: &Path, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(names)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one CSV row per record, with a header from the field names.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn direction_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("w{j}")).collect()
}

/// Direction coordinates followed by a radius column.
pub fn write_curve(path: &Path, points: &[CurvePoint], radius_name: &str) -> Result<()> {
    let d = points.first().map_or(0, |p| p.direction.len());
    let mut names = direction_names(d);
    names.push(radius_name.to_string());
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let mut r = p.direction.clone();
            r.push(p.radius);
            r
        })
        .collect();
    write_table(path, &names, &rows)
}

/// Limit-set samples. Each row names the coordinates its direction
/// refers to and, for projections, the dropped coordinates (one-based).
pub fn write_limit_set(path: &Path, surfaces: &[LimitSetSurface]) -> Result<()> {
    let join = |v: &[usize]| v.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join("-");
    let k = surfaces.first().map_or(0, |s| s.coordinates.len());
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["coordinates".to_string(), "dropped".to_string()];
    header.extend((1..=k).map(|j| format!("v{j}")));
    header.push("r".to_string());
    w.write_record(&header)?;
    for s in surfaces {
        let (coords, dropped) = (join(&s.coordinates), join(&s.dropped));
        for p in &s.rows {
            let mut rec = vec![coords.clone(), dropped.clone()];
            rec.extend(p.direction.iter().map(|v| v.to_string()));
            rec.push(p.radius.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
