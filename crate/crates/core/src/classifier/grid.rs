use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::Result;

/// One grid point. Unused hyperparameters stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperParams {
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    pub reg: Option<f64>,
    pub l2: f64,
}

impl HyperParams {
    /// Tie-break order: smaller alpha, then sigma, then reg, then penalty.
    fn tie_key(&self) -> [f64; 4] {
        [
            self.alpha.unwrap_or(0.0),
            self.sigma.unwrap_or(0.0),
            self.reg.unwrap_or(0.0),
            self.l2,
        ]
    }

    pub fn describe(&self) -> String {
        let mut s = String::new();
        for (name, v) in [("alpha", self.alpha), ("sigma", self.sigma), ("reg", self.reg)] {
            if let Some(v) = v {
                s.push_str(&alloc::format!("{name}={v:e} "));
            }
        }
        s.push_str(&alloc::format!("l2={:e}", self.l2));
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridEntry {
    pub params: HyperParams,
    pub dev_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSearchReport {
    pub entries: Vec<GridEntry>,
    pub best: usize,
}

impl GridSearchReport {
    /// Selects the max-dev entry; test accuracy is never read.
    pub fn from_entries(entries: Vec<GridEntry>) -> Self {
        let mut best = 0;
        for i in 1..entries.len() {
            let (a, b) = (&entries[i], &entries[best]);
            let better = match a.dev_acc.partial_cmp(&b.dev_acc) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => a.params.tie_key() < b.params.tie_key(),
                _ => false,
            };
            if better {
                best = i;
            }
        }
        GridSearchReport { entries, best }
    }

    pub fn best_entry(&self) -> &GridEntry {
        &self.entries[self.best]
    }
}

/// Evaluates every grid point with `eval` (returning dev and test accuracy)
/// and selects by dev accuracy. Errors carry the failing grid point.
pub fn grid_search_with<F>(points: &[HyperParams], mut eval: F) -> Result<GridSearchReport>
where
    F: FnMut(&HyperParams) -> Result<(f64, f64)>,
{
    if points.is_empty() {
        return Err(crate::error::Error::invalid("empty hyperparameter grid"));
    }
    let mut entries = Vec::with_capacity(points.len());
    for p in points {
        let (dev_acc, test_acc) = eval(p).map_err(|e| e.context(alloc::format!("grid point {}", p.describe())))?;
        entries.push(GridEntry {
            params: *p,
            dev_acc,
            test_acc,
        });
    }
    Ok(GridSearchReport::from_entries(entries))
}
