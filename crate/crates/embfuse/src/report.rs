//! Metric files. Every row carries the configuration hash and base seed.
//! Wall-clock times appear only in the per-run JSON lines so that metric
//! CSVs are byte-identical across reruns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use embfuse_core::classifier::GridSearchReport;
use embfuse_core::pipeline::{PipelineResult, RepeatResult, SweepPoint};
use serde::Serialize;

use crate::error::{Error, Result};

/// Per-run record for the JSON-lines stream.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub repeat: usize,
    pub repeat_seed: u64,
    pub train_size: Option<usize>,
    pub wall_time_s: f64,
    pub results: Vec<RepeatResult>,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    config_hash: &'a str,
    seed: u64,
    method: &'a str,
    encoder: &'a str,
    train_size: usize,
    /// Repeat index, or `mean` for the summary row.
    row: String,
    repeat_seed: Option<u64>,
    dev_acc: f64,
    test_acc: f64,
    test_std: Option<f64>,
    params: String,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// One row per (method, repeat) followed by one `mean` row per method.
pub fn write_metrics_csv(path: &Path, config_hash: &str, seed: u64, results: &[PipelineResult]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in results {
        for rep in &r.repeats {
            w.serialize(MetricRow {
                config_hash,
                seed,
                method: r.method.name(),
                encoder: r.encoder.name(),
                train_size: rep.train_size,
                row: rep.repeat.to_string(),
                repeat_seed: Some(rep.seed),
                dev_acc: rep.dev_acc,
                test_acc: rep.test_acc,
                test_std: None,
                params: rep.grid.best_entry().params.describe(),
            })?;
        }
        w.serialize(MetricRow {
            config_hash,
            seed,
            method: r.method.name(),
            encoder: r.encoder.name(),
            train_size: r.repeats.first().map_or(0, |x| x.train_size),
            row: "mean".into(),
            repeat_seed: None,
            dev_acc: r.mean_dev,
            test_acc: r.mean_test,
            test_std: Some(r.std_test),
            params: String::new(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow<'a> {
    pub config_hash: &'a str,
    pub seed: u64,
    pub method: &'a str,
    pub index: usize,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub reg: Option<f64>,
    pub l2: f64,
    pub dev_acc: f64,
    pub test_acc: f64,
    pub best: bool,
}

pub fn grid_rows<'a>(config_hash: &'a str, seed: u64, method: &'a str, g: &GridSearchReport) -> Vec<GridRow<'a>> {
    g.entries
        .iter()
        .enumerate()
        .map(|(i, e)| GridRow {
            config_hash,
            seed,
            method,
            index: i,
            alpha: e.params.alpha,
            sigma: e.params.sigma,
            reg: e.params.reg,
            l2: e.params.l2,
            dev_acc: e.dev_acc,
            test_acc: e.test_acc,
            best: i == g.best,
        })
        .collect()
}

/// One row per grid point in grid order.
pub fn write_grid_csv(path: &Path, rows: &[GridRow<'_>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per size; each method contributes `<method>_mean` and
/// `<method>_std` columns.
pub fn write_sweep_csv(path: &Path, config_hash: &str, seed: u64, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let methods: Vec<&str> = points
        .first()
        .map(|p| p.results.iter().map(|r| r.method.name()).collect())
        .unwrap_or_default();
    let mut header = vec!["config_hash".to_string(), "seed".into(), "size".into()];
    for m in &methods {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for p in points {
        let mut rec = vec![config_hash.to_string(), seed.to_string(), p.size.to_string()];
        for r in &p.results {
            rec.push(format!("{:?}", r.mean_test));
            rec.push(format!("{:?}", r.std_test));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
