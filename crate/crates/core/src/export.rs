//! CSV and JSON writers for run artifacts. Variable indices and block ids
//! are written 1-based; floats use Rust's shortest round-trip formatting so
//! reruns are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::cov_block::BlockPartition;
use crate::data::SelectionResult;
use crate::error::{Error, Result};
use crate::icis::{FdrCurve, FrequencyTable};
use crate::screening::ScreenStats;
use crate::simgen::SimTruth;

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn row<I, T>(w: &mut csv::Writer<File>, path: &Path, fields: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| Error::csv(path, e))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PartitionSummary {
    delta: f64,
    cap: usize,
    forced_splits: usize,
    num_blocks: usize,
    max_block_size: usize,
}

/// `variable_index_1based,block_id` plus a JSON sidecar at `<path>.json`
/// with threshold, cap and split counts.
pub fn write_partition(part: &BlockPartition, p: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    row(&mut w, path, ["variable_index_1based", "block_id"])?;
    for (j, b) in part.block_ids(p).into_iter().enumerate() {
        row(&mut w, path, [(j + 1).to_string(), (b + 1).to_string()])?;
    }
    finish(w, path)?;
    let summary = PartitionSummary {
        delta: part.delta,
        cap: part.cap,
        forced_splits: part.forced_splits,
        num_blocks: part.num_blocks(),
        max_block_size: part.max_block_size(),
    };
    write_json(&summary, path.with_extension("json"))
}

pub fn write_stats(stats: &ScreenStats, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let p = stats.p();
    let ranks = stats.ranks();
    let blocks = stats.partition.as_ref().map(|part| part.block_ids(p));
    let mut w = writer(path)?;
    row(
        &mut w,
        path,
        ["variable_index_1based", "name", "method", "statistic", "rank", "block_id"],
    )?;
    for j in 0..p {
        let block = blocks
            .as_ref()
            .map(|b| (b[j] + 1).to_string())
            .unwrap_or_default();
        row(
            &mut w,
            path,
            [
                (j + 1).to_string(),
                names[j].clone(),
                stats.method.to_string(),
                stats.stats[j].to_string(),
                ranks[j].to_string(),
                block,
            ],
        )?;
    }
    finish(w, path)
}

pub fn write_selection(sel: &SelectionResult, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    row(&mut w, path, ["variable_index_1based", "name"])?;
    for j in sel.selected.iter() {
        row(&mut w, path, [(j + 1).to_string(), names[j].clone()])?;
    }
    finish(w, path)
}

pub fn write_frequencies(f: &FrequencyTable, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    row(&mut w, path, ["variable_index_1based", "name", "count", "psi_hat"])?;
    for (j, psi) in f.psi_hat().into_iter().enumerate() {
        row(
            &mut w,
            path,
            [
                (j + 1).to_string(),
                names[j].clone(),
                f.counts[j].to_string(),
                psi.to_string(),
            ],
        )?;
    }
    finish(w, path)
}

pub fn write_fdr(curve: &FdrCurve, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    row(&mut w, path, ["psi", "null_mean", "observed", "fdr_raw", "fdr_hat"])?;
    for i in 0..curve.thresholds.len() {
        row(
            &mut w,
            path,
            [
                curve.thresholds[i].to_string(),
                curve.null_mean[i].to_string(),
                curve.observed[i].to_string(),
                curve.fdr_raw[i].to_string(),
                curve.fdr_hat[i].to_string(),
            ],
        )?;
    }
    finish(w, path)
}

/// `index,beta` with 1-based indices, one row per predictor.
pub fn write_truth(truth: &SimTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    row(&mut w, path, ["index", "beta"])?;
    for (j, b) in truth.beta.iter().enumerate() {
        row(&mut w, path, [(j + 1).to_string(), b.to_string()])?;
    }
    finish(w, path)
}
