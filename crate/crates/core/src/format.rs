//! On-disk trace format: UTF-8, line-delimited.
//!
//! Line 1 is a header object
//! `{version, id, feature_dim, duration_s, phases, phase_marks}`; every
//! following line is one frame `{t, x}`. Floats are rendered as
//! shortest-round-trip decimal text, so save/load is bit-exact; the parser
//! accepts scientific notation. A dataset is a directory of `*.trace`
//! files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trace::{FeatureFrame, PhaseSchema, ProcessTrace};

pub const TRACE_FORMAT_VERSION: u32 = 1;
pub const TRACE_EXTENSION: &str = "trace";

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader<T> {
    version: u32,
    id: String,
    feature_dim: usize,
    duration_s: T,
    phases: Vec<String>,
    phase_marks: Vec<(usize, usize)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameLine<T> {
    t: T,
    x: Vec<T>,
}

pub fn save_trace<T: Real>(trace: &ProcessTrace<T>, path: &Path) -> Result<()> {
    trace.validate()?;
    let file = File::create(path)
        .map_err(|e| Error::usage(format!("cannot create {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    let header = TraceHeader {
        version: TRACE_FORMAT_VERSION,
        id: trace.id.clone(),
        feature_dim: trace.feature_dim(),
        duration_s: trace.duration_s,
        phases: trace.schema.names().to_vec(),
        phase_marks: trace.phase_marks.clone(),
    };
    let write_err = |e: std::io::Error| Error::usage(format!("write {}: {e}", path.display()));
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| Error::usage(format!("serialize header: {e}")))?;
    out.write_all(b"\n").map_err(write_err)?;
    for frame in &trace.frames {
        let line = FrameLine {
            t: frame.timestamp,
            x: frame.features.clone(),
        };
        serde_json::to_writer(&mut out, &line)
            .map_err(|e| Error::usage(format!("serialize frame: {e}")))?;
        out.write_all(b"\n").map_err(write_err)?;
    }
    out.flush().map_err(write_err)?;
    Ok(())
}

pub fn load_trace<T: Real>(path: &Path) -> Result<ProcessTrace<T>> {
    let file = File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::data_at(1, format!("{}: empty trace file", path.display())))?;
    let header_line =
        header_line.map_err(|e| Error::data_at(1, format!("{}: {e}", path.display())))?;
    let header: TraceHeader<T> = serde_json::from_str(&header_line)
        .map_err(|e| Error::data_at(1, format!("{}: bad header: {e}", path.display())))?;
    if header.version != TRACE_FORMAT_VERSION {
        return Err(Error::data_at(
            1,
            format!(
                "{}: unsupported trace format version {}",
                path.display(),
                header.version
            ),
        ));
    }

    let mut frames = Vec::new();
    let mut prev_ts: Option<T> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::data_at(line_no, format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameLine<T> = serde_json::from_str(&line)
            .map_err(|e| Error::data_at(line_no, format!("{}: malformed frame: {e}", path.display())))?;
        if frame.x.len() != header.feature_dim {
            return Err(Error::data_at(
                line_no,
                format!(
                    "{}: frame has {} features, header says {}",
                    path.display(),
                    frame.x.len(),
                    header.feature_dim
                ),
            ));
        }
        if let Some(prev) = prev_ts {
            if frame.t <= prev {
                return Err(Error::data_at(
                    line_no,
                    format!("{}: timestamps not strictly increasing", path.display()),
                ));
            }
        }
        prev_ts = Some(frame.t);
        frames.push(FeatureFrame {
            timestamp: frame.t,
            features: frame.x,
        });
    }

    let schema = PhaseSchema::new(header.phases)?;
    ProcessTrace::new(header.id, schema, frames, header.phase_marks, header.duration_s)
}

/// Write every trace as `<id>.trace` inside `dir`, creating it if needed.
pub fn save_dataset<T: Real>(traces: &[ProcessTrace<T>], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::usage(format!("cannot create {}: {e}", dir.display())))?;
    let mut paths = Vec::with_capacity(traces.len());
    for trace in traces {
        let path = dir.join(format!("{}.{TRACE_EXTENSION}", trace.id));
        save_trace(trace, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Load all `*.trace` files from `dir`, sorted by file name.
pub fn load_dataset<T: Real>(dir: &Path) -> Result<Vec<ProcessTrace<T>>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::data(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(TRACE_EXTENSION))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::data(format!(
            "no .{TRACE_EXTENSION} files in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_trace(p)).collect()
}
