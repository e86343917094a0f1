//! File formats: JSONL paths, CSV tables and JSON reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use qnpop_core::diffusion::DiffusionPath;
use qnpop_core::process::{EventKind, PopulationPath};
use serde::Serialize;

use crate::report::ExperimentReport;
use crate::HarnessError;

#[derive(Serialize)]
struct PathLine<'a> {
    t: f64,
    x: &'a [f64],
}

/// One JSON object `{"t": ..., "x": [...]}` per snapshot.
pub fn write_path_jsonl<W: Write>(mut w: W, path: &PopulationPath) -> Result<(), HarnessError> {
    for (t, x) in &path.snapshots {
        serde_json::to_writer(&mut w, &PathLine { t: *t, x })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Diffusion path in the same line format as [`write_path_jsonl`].
pub fn write_diffusion_jsonl<W: Write>(mut w: W, path: &DiffusionPath) -> Result<(), HarnessError> {
    for (t, x) in path.times.iter().zip(&path.points) {
        serde_json::to_writer(&mut w, &PathLine { t: *t, x })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EventRow {
    time: f64,
    kind: &'static str,
    r#type: usize,
    clutch: Option<usize>,
}

/// Event log with columns `time,kind,type,clutch`; `clutch` is empty for
/// deaths.
pub fn write_events_csv<W: Write>(w: W, path: &PopulationPath) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    for e in &path.events {
        let row = match e.kind {
            EventKind::Birth { parent, clutch } => EventRow { time: e.time, kind: "birth", r#type: parent, clutch: Some(clutch) },
            EventKind::Death { type_index } => EventRow { time: e.time, kind: "death", r#type: type_index, clutch: None },
        };
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `rows` as CSV with a header taken from the row type.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(BufWriter::new(create(path)?));
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `report.json` into `dir` and returns its path.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<PathBuf, HarnessError> {
    let path = dir.join("report.json");
    let mut w = BufWriter::new(create(&path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}

fn create(path: &Path) -> Result<File, HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}
