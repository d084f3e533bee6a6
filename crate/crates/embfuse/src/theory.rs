//! Theorem verification runs with named assertions and JSON reports.

use embfuse_core::theory::{
    random_world, sweep_c, verify_theorem1, verify_theorem2, Loss, SweepRow, Theorem1Options, Theorem1Report,
    Theorem2Options, Theorem2Report,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Thm1,
    #[value(name = "thm1_sweep_c")]
    Thm1SweepC,
    Thm2,
    Residue,
}

/// One asserted relation `lo <= value <= hi` (either side optional).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub holds: bool,
}

impl Assertion {
    pub fn within(name: impl Into<String>, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let holds = lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        Assertion {
            name: name.into(),
            value,
            lo,
            hi,
            holds,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self::within(name, value, None, Some(hi))
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self::within(name, value, Some(lo), None)
    }

    pub fn describe(&self) -> String {
        let v = num(self.value);
        match (self.lo, self.hi) {
            (Some(l), Some(h)) => format!("{}: {} <= {v} <= {}", self.name, num(l), num(h)),
            (Some(l), None) => format!("{}: {v} >= {}", self.name, num(l)),
            (None, Some(h)) => format!("{}: {v} <= {}", self.name, num(h)),
            (None, None) => format!("{}: {v}", self.name),
        }
    }
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e6).contains(&x.abs()) {
        format!("{:.6}", x).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.3e}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub which: Which,
    pub seed: u64,
    pub params: serde_json::Value,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    pub details: serde_json::Value,
}

impl TheoryReport {
    fn new(which: Which, seed: u64, params: impl Serialize, assertions: Vec<Assertion>, details: impl Serialize) -> Result<Self> {
        Ok(TheoryReport {
            which,
            seed,
            params: serde_json::to_value(params)?,
            passed: assertions.iter().all(|a| a.holds),
            assertions,
            details: serde_json::to_value(details)?,
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.holds)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm1Params {
    pub worlds: usize,
    pub n: usize,
    /// World `i` uses `sigmas[i % len]`.
    pub sigmas: Vec<f64>,
    pub loss: Loss,
}

impl Default for Thm1Params {
    fn default() -> Self {
        Thm1Params {
            worlds: 100,
            n: 100_000,
            sigmas: vec![0.0, 0.1, 0.3, 1.0, 3.0],
            loss: Loss::Logistic,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct WorldSummary {
    index: usize,
    dims: [usize; 3],
    report: Theorem1Report,
}

/// Random full-rank worlds; every step of the bound is checked per world.
pub fn run_thm1(p: &Thm1Params, seed: u64) -> Result<TheoryReport> {
    if p.sigmas.is_empty() || p.worlds == 0 {
        return Err(crate::Error::usage("thm1 needs at least one world and one sigma"));
    }
    let opts = Theorem1Options {
        n: p.n,
        loss: p.loss,
        ..Theorem1Options::default()
    };
    let worlds: Vec<WorldSummary> = (0..p.worlds)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            let w = random_world(p.sigmas[i % p.sigmas.len()], s)?;
            let report = verify_theorem1(&w, &opts, s.wrapping_mul(0x2545_f491_4f6c_dd1d))?;
            Ok(WorldSummary {
                index: i,
                dims: [w.dim_star(), w.d1(), w.d2()],
                report,
            })
        })
        .collect::<std::result::Result<_, embfuse_core::Error>>()?;
    let mut assertions = Vec::new();
    let mut violations = 0usize;
    for w in &worlds {
        for c in w.report.checks.iter().filter(|c| !c.holds) {
            violations += 1;
            assertions.push(Assertion::at_most(
                format!("world {} {}", w.index, c.name),
                c.lhs,
                c.rhs + c.slack,
            ));
        }
    }
    assertions.insert(0, Assertion::at_most("violations", violations as f64, 0.0));
    let noiseless: Vec<f64> = worlds.iter().filter_map(|w| w.report.noiseless_gap).collect();
    if let Some(max) = noiseless.iter().copied().reduce(f64::max) {
        assertions.insert(1, Assertion::at_most("max noiseless gap", max, 1e-10));
    }
    TheoryReport::new(Which::Thm1, seed, p, assertions, worlds)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepParams {
    pub cs: Vec<f64>,
    pub sigma: f64,
    pub n: usize,
    pub loss: Loss,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            cs: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            sigma: 1.0,
            n: 100_000,
            loss: Loss::Logistic,
        }
    }
}

/// Diagonal example: `|(P^+)^T w*| = sqrt(2)/c` and excess loss falling in `c`.
pub fn run_sweep_c(p: &SweepParams, seed: u64) -> Result<TheoryReport> {
    let mut cs = p.cs.clone();
    cs.sort_by(f64::total_cmp);
    let rows: Vec<SweepRow> = sweep_c(&cs, p.sigma, p.n, p.loss, seed)?;
    let mut assertions = Vec::new();
    for r in &rows {
        assertions.push(Assertion::at_most(
            format!("c={} norm error", r.c),
            (r.w_bar_norm - r.expected_norm).abs(),
            1e-12,
        ));
        assertions.push(Assertion::at_most(
            format!("c={} excess minus bound", r.c),
            r.excess.mean - r.bound,
            3.0 * r.excess.std_err,
        ));
    }
    for w in rows.windows(2) {
        assertions.push(Assertion::at_most(
            format!("excess increase from c={} to c={}", w[0].c, w[1].c),
            w[1].excess.mean - w[0].excess.mean,
            0.0,
        ));
    }
    TheoryReport::new(Which::Thm1SweepC, seed, p, assertions, rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct Thm2Params {
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: usize,
}

impl Default for Thm2Params {
    fn default() -> Self {
        Thm2Params {
            d: 8,
            n_train: 10_000,
            n_test: 2_000,
            seeds: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Thm2Details {
    mean_acc_cat: f64,
    mean_acc_cca: f64,
    mean_acc_residue: f64,
    runs: Vec<Theorem2Report>,
}

fn thm2_runs(p: &Thm2Params, seed: u64) -> Result<Thm2Details> {
    if p.seeds == 0 {
        return Err(crate::Error::usage("thm2 needs at least one seed"));
    }
    let opts = Theorem2Options::default();
    let runs: Vec<Theorem2Report> = (0..p.seeds)
        .into_par_iter()
        .map(|i| verify_theorem2(p.d, p.n_train, p.n_test, seed.wrapping_add(i as u64), &opts))
        .collect::<std::result::Result<_, embfuse_core::Error>>()?;
    let mean = |f: fn(&Theorem2Report) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    Ok(Thm2Details {
        mean_acc_cat: mean(|r| r.acc_cat),
        mean_acc_cca: mean(|r| r.acc_cca),
        mean_acc_residue: mean(|r| r.acc_residue),
        runs,
    })
}

/// Seed-averaged accuracies on the world where CCA discards the label.
pub fn run_thm2(p: &Thm2Params, seed: u64) -> Result<TheoryReport> {
    let d = thm2_runs(p, seed)?;
    let assertions = vec![
        Assertion::at_least("acc_cat", d.mean_acc_cat, 0.99),
        Assertion::at_least("acc_residue", d.mean_acc_residue, 0.99),
        Assertion::within("acc_cca", d.mean_acc_cca, Some(0.45), Some(0.55)),
    ];
    TheoryReport::new(Which::Thm2, seed, p, assertions, d)
}

/// Residue concatenation against CCA on the same world.
pub fn run_residue(p: &Thm2Params, seed: u64) -> Result<TheoryReport> {
    let d = thm2_runs(p, seed)?;
    let assertions = vec![Assertion::at_least(
        "acc_residue - acc_cca",
        d.mean_acc_residue - d.mean_acc_cca,
        0.4,
    )];
    TheoryReport::new(Which::Residue, seed, p, assertions, d)
}
