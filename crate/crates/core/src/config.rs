use alloc::vec::Vec;

use crate::classifier::OptimizerConfig;
use crate::combiner::DEFAULT_KERNEL_CAP;
use crate::dataset::SplitMode;
use crate::encoder::{CnnConfig, TrainConfig};
use crate::error::{Error, Result};

/// `lo, 10*lo, 100*lo, ...` up to and including `hi` (with a small relative slack).
pub fn decade_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut v = lo;
    while v <= hi * (1.0 + 1e-9) {
        out.push(v);
        v *= 10.0;
    }
    out
}

/// Seeds, repeat count and hyperparameter grids for one experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RunConfig {
    pub seed: u64,
    pub repeats: usize,
    pub alpha_grid: Vec<f64>,
    pub l2_grid: Vec<f64>,
    pub cca_reg_grid: Vec<f64>,
    pub kcca_sigma_grid: Vec<f64>,
    pub kcca_reg_grid: Vec<f64>,
    pub split_fractions: (f64, f64, f64),
    pub split_mode: SplitMode,
    pub cnn: CnnConfig,
    /// Encoder training and CAT-open fine-tuning.
    pub encoder: TrainConfig,
    pub logreg: OptimizerConfig,
    /// Largest training set KCCA accepts.
    pub kernel_cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            repeats: 10,
            alpha_grid: decade_grid(0.002, 500.0),
            l2_grid: decade_grid(1e-4, 1e2),
            cca_reg_grid: decade_grid(1e-5, 10.0),
            kcca_sigma_grid: decade_grid(0.05, 10.0),
            kcca_reg_grid: decade_grid(1e-5, 10.0),
            split_fractions: (0.8, 0.1, 0.1),
            split_mode: SplitMode::Stratified,
            cnn: CnnConfig::default(),
            encoder: TrainConfig::default(),
            logreg: OptimizerConfig::default(),
            kernel_cap: DEFAULT_KERNEL_CAP,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be at least 1"));
        }
        let grids: [(&str, &Vec<f64>); 5] = [
            ("alpha_grid", &self.alpha_grid),
            ("l2_grid", &self.l2_grid),
            ("cca_reg_grid", &self.cca_reg_grid),
            ("kcca_sigma_grid", &self.kcca_sigma_grid),
            ("kcca_reg_grid", &self.kcca_reg_grid),
        ];
        for (name, g) in grids {
            if g.is_empty() {
                return Err(Error::invalid(alloc::format!("{name} is empty")));
            }
            if let Some(v) = g.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid(alloc::format!("{name} contains non-positive value {v}")));
            }
        }
        self.cnn.validate()?;
        if self.encoder.batch_size == 0 || !(self.encoder.learning_rate > 0.0) || !(self.encoder.head_l2 >= 0.0) {
            return Err(Error::invalid("encoder training needs a positive batch size and learning rate"));
        }
        if self.logreg.max_epochs == 0 || self.logreg.memory == 0 {
            return Err(Error::invalid("logreg needs max_epochs and memory of at least 1"));
        }
        Ok(())
    }

    /// Seed for repeat `i`.
    pub fn repeat_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}
