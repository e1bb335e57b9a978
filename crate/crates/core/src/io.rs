//! CSV and JSON artifacts.
//!
//! Simulator files have columns `t,x1[,x2,…]`; forecast files add a
//! `source` column (`truth` or `forecast`); mapping files have
//! `t,x1,x2_true,x2_mapped,mode,padding`. Values are written with full
//! round-trip precision.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::training::FitReport;
use crate::types::{Padding, Trajectory};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_aligned<T: Scalar>(channels: &[Trajectory<T>]) -> Result<usize> {
    let first = channels.first().ok_or_else(|| invalid("no channels to write"))?;
    if channels.iter().any(|c| c.len() != first.len()) {
        return Err(invalid("channels have different lengths"));
    }
    Ok(first.len())
}

fn header(channels: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=channels).map(|i| format!("x{i}")))
        .collect()
}

fn rows<T: Scalar>(channels: &[Trajectory<T>]) -> impl Iterator<Item = Vec<String>> + '_ {
    let n = channels[0].len();
    (0..n).map(move |i| {
        std::iter::once(channels[0].time(i))
            .chain(channels.iter().map(|c| c.samples()[i]))
            .map(|v| v.to_f64_lossy().to_string())
            .collect()
    })
}

/// Writes sampled channels in the simulator schema.
pub fn write_trajectories<T: Scalar>(path: &Path, channels: &[Trajectory<T>]) -> Result<()> {
    check_aligned(channels)?;
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header(channels.len())).map_err(csv_err(path))?;
    for row in rows(channels) {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a simulator-schema file. Δ is taken from the first two times.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.get(0) != Some("t") || headers.len() < 2 {
        return Err(invalid(format!("{}: expected header t,x1[,x2,...]", path.display())));
    }
    let channels = headers.iter().skip(1).take_while(|h| h.starts_with('x')).count();
    let mut times = Vec::new();
    let mut values = vec![Vec::new(); channels];
    for record in r.records() {
        let record = record.map_err(csv_err(path))?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| invalid(format!("{}: bad number in column {i}", path.display())))
        };
        times.push(parse(0)?);
        for (c, v) in values.iter_mut().enumerate() {
            v.push(parse(c + 1)?);
        }
    }
    if times.len() < 2 {
        return Err(invalid(format!("{}: need at least two rows", path.display())));
    }
    let delta = times[1] - times[0];
    values
        .into_iter()
        .map(|v| Trajectory::new(v, delta, times[0]))
        .collect()
}

/// Writes ground truth and forecast in one file, distinguished by `source`.
pub fn write_forecast<T: Scalar>(path: &Path, truth: &[Trajectory<T>], forecast: &[Trajectory<T>]) -> Result<()> {
    if truth.len() != forecast.len() {
        return Err(invalid("truth and forecast have different channel counts"));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut head = header(truth.len());
    head.push("source".into());
    w.write_record(&head).map_err(csv_err(path))?;
    for (set, source) in [(truth, "truth"), (forecast, "forecast")] {
        if set.first().is_some_and(|c| c.is_empty()) {
            continue;
        }
        check_aligned(set)?;
        for mut row in rows(set) {
            row.push(source.into());
            w.write_record(row).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingRecord {
    pub t: f64,
    pub x1: f64,
    pub x2_true: f64,
    pub x2_mapped: f64,
    pub mode: String,
    pub padding: Padding,
}

/// Joins observed x₁, true x₂ and a (possibly shorter) mapped x̂₂ on time.
pub fn mapping_records<T: Scalar>(
    x1: &Trajectory<T>,
    x2_true: &Trajectory<T>,
    mapped: &Trajectory<T>,
    mode: &str,
    padding: Padding,
) -> Result<Vec<MappingRecord>> {
    if x1.len() != x2_true.len() || mapped.len() > x1.len() {
        return Err(invalid("mapping columns are misaligned"));
    }
    let offset = x1.len() - mapped.len();
    Ok((0..mapped.len())
        .map(|i| MappingRecord {
            t: mapped.time(i).to_f64_lossy(),
            x1: x1.samples()[offset + i].to_f64_lossy(),
            x2_true: x2_true.samples()[offset + i].to_f64_lossy(),
            x2_mapped: mapped.samples()[i].to_f64_lossy(),
            mode: mode.to_string(),
            padding,
        })
        .collect())
}

pub fn write_mapping(path: &Path, records: &[MappingRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    if records.is_empty() {
        w.write_record(["t", "x1", "x2_true", "x2_mapped", "mode", "padding"])
            .map_err(csv_err(path))?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_mapping(path: &Path) -> Result<Vec<MappingRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|rec| rec.map_err(csv_err(path))).collect()
}

pub fn write_report<T: Scalar>(path: &Path, report: &FitReport<T>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(file, &report.to_json())?;
    Ok(())
}
