//! Ways of merging a pre-trained view and a domain view into one vector per
//! sentence: weighted concatenation, linear CCA, Gaussian-kernel CCA, and
//! the concatenation of CCA residues.

mod cat;
mod cca;
mod kcca;

pub use cat::{cat_combine, split_cat, CatCombiner};
pub use cca::{cca_combine, cca_residue, fit_cca, residue_combine, CcaCombiner, CcaOptions, View};
pub use kcca::{fit_kcca, gaussian_kernel, kcca_combine, KccaCombiner, KccaOptions, DEFAULT_KERNEL_CAP};

use crate::embedding::EmbeddingSet;
use crate::error::Result;

/// A fitted combination transform.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "fit", rename_all = "snake_case"))]
pub enum Combiner {
    Cat(CatCombiner),
    Cca(CcaCombiner),
    Kcca(KccaCombiner),
    /// `[r1, r2]` built from a fitted CCA.
    Residue(CcaCombiner),
}

impl Combiner {
    pub fn combine(&self, v1: &EmbeddingSet, v2: &EmbeddingSet) -> Result<EmbeddingSet> {
        match self {
            Combiner::Cat(c) => cat_combine(v1, v2, c.alpha),
            Combiner::Cca(c) => cca_combine(c, v1, v2),
            Combiner::Kcca(c) => kcca_combine(c, v1, v2),
            Combiner::Residue(c) => residue_combine(c, v1, v2),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Combiner::Cat(_) => "cat",
            Combiner::Cca(_) => "cca",
            Combiner::Kcca(_) => "kcca",
            Combiner::Residue(_) => "residue",
        }
    }
}
