//! Runs repeats and sweeps on the rayon pool. Each repeat depends only on
//! its own seed and results are merged in repeat order, so the output does
//! not depend on the thread count.

use std::time::Instant;

use embfuse_core::pipeline::{self, EncoderMode, Method, PipelineData, PipelineResult, SweepPoint};
use embfuse_core::RunConfig;
use rayon::prelude::*;

use crate::error::Result;
use crate::report::RunRecord;

pub struct Outcome {
    pub results: Vec<PipelineResult>,
    pub runs: Vec<RunRecord>,
}

pub fn run_repeats(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    train_size: Option<usize>,
    config_hash: &str,
) -> Result<Outcome> {
    pipeline::validate_methods(methods, encoder, &data, cfg)?;
    let per: Vec<(Vec<_>, f64)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let r = pipeline::run_repeat(methods, encoder, data, cfg, i, train_size)?;
            Ok((r, start.elapsed().as_secs_f64()))
        })
        .collect::<std::result::Result<_, embfuse_core::Error>>()?;
    let runs = per
        .iter()
        .enumerate()
        .map(|(i, (r, t))| RunRecord {
            config_hash: config_hash.to_string(),
            seed: cfg.seed,
            repeat: i,
            repeat_seed: cfg.repeat_seed(i),
            train_size,
            wall_time_s: *t,
            results: r.clone(),
        })
        .collect();
    let results = pipeline::collect_results(encoder, per.into_iter().map(|(r, _)| r).collect());
    Ok(Outcome { results, runs })
}

pub fn run_sweep(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    sizes: &[usize],
    config_hash: &str,
) -> Result<(Vec<SweepPoint>, Vec<RunRecord>)> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::Error::usage("sizes must be non-empty and strictly ascending"));
    }
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for &size in sizes {
        let out = run_repeats(methods, encoder, data, cfg, Some(size), config_hash)?;
        points.push(SweepPoint { size, results: out.results });
        runs.extend(out.runs);
    }
    Ok((points, runs))
}
