use nalgebra::DVector;

use crate::embedding::{tag_of, EmbeddingSet, Mat};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CcaOptions {
    /// Ridge added to both view covariances before whitening.
    pub reg: f64,
    /// Number of canonical pairs kept; defaults to `min(d1, d2)`.
    pub n_components: Option<usize>,
    /// Divide each projected coordinate by its training standard deviation.
    pub unit_variance: bool,
}

impl CcaOptions {
    pub fn new(reg: f64) -> Self {
        CcaOptions {
            reg,
            n_components: None,
            unit_variance: false,
        }
    }
}

/// Fitted regularized CCA: `phi1` is `d x d1`, `phi2` is `d x d2`, rows
/// ordered by descending canonical correlation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CcaCombiner {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub phi1: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub phi2: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub mean1: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub mean2: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub correlations: DVector<f64>,
    pub reg: f64,
    /// Training standard deviation of each projected coordinate, per view.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub scale1: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub scale2: DVector<f64>,
    pub unit_variance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    First,
    Second,
}

impl CcaCombiner {
    pub fn components(&self) -> usize {
        self.correlations.len()
    }

    /// Canonical variates `phi_k (v - mean_k)` of one view, one row per sentence.
    pub fn project(&self, v: &EmbeddingSet, view: View) -> Result<Mat> {
        let (phi, mean, scale) = match view {
            View::First => (&self.phi1, &self.mean1, &self.scale1),
            View::Second => (&self.phi2, &self.mean2, &self.scale2),
        };
        v.require_dim(phi.ncols(), "CCA projection input dim")?;
        let mut out = linalg::center(v.vectors(), mean) * phi.transpose();
        if self.unit_variance {
            for (j, mut col) in out.column_iter_mut().enumerate() {
                if scale[j] > 1e-12 {
                    col.scale_mut(1.0 / scale[j]);
                }
            }
        }
        Ok(out)
    }
}

fn column_std(m: &Mat) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().map(|c| {
            let mu = c.sum() / n;
            libm::sqrt(c.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1.0).max(1.0))
        }),
    )
}

/// Regularized CCA: centre both views with their own means, ridge-whiten
/// each covariance, and take the SVD of the whitened cross-covariance.
pub fn fit_cca(v1: &EmbeddingSet, v2: &EmbeddingSet, opts: CcaOptions) -> Result<CcaCombiner> {
    v2.require_rows(v1.n(), "fit_cca row count")?;
    if v1.n() < 2 {
        return Err(Error::invalid("CCA needs at least two rows"));
    }
    if !(opts.reg > 0.0) || !opts.reg.is_finite() {
        return Err(Error::invalid(alloc::format!("CCA ridge must be positive, got {}", opts.reg)));
    }
    let max_k = v1.dim().min(v2.dim());
    let k = opts.n_components.unwrap_or(max_k);
    if k == 0 || k > max_k {
        return Err(Error::invalid(alloc::format!(
            "CCA components must be in 1..={max_k}, got {k}"
        )));
    }
    let mean1 = linalg::column_means(v1.vectors());
    let mean2 = linalg::column_means(v2.vectors());
    let x1 = linalg::center(v1.vectors(), &mean1);
    let x2 = linalg::center(v2.vectors(), &mean2);
    let c11 = linalg::cross_cov(&x1, &x1);
    let c22 = linalg::cross_cov(&x2, &x2);
    let c12 = linalg::cross_cov(&x1, &x2);
    let w1 = linalg::whiten(&c11, opts.reg)?;
    let w2 = linalg::whiten(&c22, opts.reg)?;
    let t = &w1 * c12 * &w2;
    let dec = linalg::svd(&t)?;
    let phi1 = dec.u.columns(0, k).transpose() * &w1;
    let phi2 = dec.v.columns(0, k).transpose() * &w2;
    let correlations = DVector::from_iterator(k, dec.singular_values.iter().take(k).copied());
    if correlations.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("degenerate covariance in CCA".into()));
    }
    let scale1 = column_std(&(&x1 * phi1.transpose()));
    let scale2 = column_std(&(&x2 * phi2.transpose()));
    Ok(CcaCombiner {
        phi1,
        phi2,
        mean1,
        mean2,
        correlations,
        reg: opts.reg,
        scale1,
        scale2,
        unit_variance: opts.unit_variance,
    })
}

/// `1/2 phi1 (v1 - mean1) + 1/2 phi2 (v2 - mean2)` per row.
pub fn cca_combine(c: &CcaCombiner, v1: &EmbeddingSet, v2: &EmbeddingSet) -> Result<EmbeddingSet> {
    v2.require_rows(v1.n(), "cca_combine row count")?;
    let p1 = c.project(v1, View::First)?;
    let p2 = c.project(v2, View::Second)?;
    EmbeddingSet::new((p1 + p2) * 0.5, tag_of(v1, v2, "cca"))
}

/// Residue `r = v_c - phi^T phi v_c` of one view, `v_c` the centred input.
pub fn cca_residue(c: &CcaCombiner, v: &EmbeddingSet, view: View) -> Result<EmbeddingSet> {
    let (phi, mean) = match view {
        View::First => (&c.phi1, &c.mean1),
        View::Second => (&c.phi2, &c.mean2),
    };
    v.require_dim(phi.ncols(), "CCA residue input dim")?;
    let vc = linalg::center(v.vectors(), mean);
    let proj = &vc * phi.transpose() * phi;
    let mut tag = alloc::string::String::from("residue(");
    tag.push_str(v.source_tag());
    tag.push(')');
    EmbeddingSet::new(vc - proj, tag)
}

/// `[r1, r2]` for each row.
pub fn residue_combine(c: &CcaCombiner, v1: &EmbeddingSet, v2: &EmbeddingSet) -> Result<EmbeddingSet> {
    v2.require_rows(v1.n(), "residue_combine row count")?;
    let r1 = cca_residue(c, v1, View::First)?;
    let r2 = cca_residue(c, v2, View::Second)?;
    let (a, b) = (r1.vectors(), r2.vectors());
    let d1 = a.ncols();
    let out = Mat::from_fn(a.nrows(), d1 + b.ncols(), |i, j| {
        if j < d1 {
            a[(i, j)]
        } else {
            b[(i, j - d1)]
        }
    });
    EmbeddingSet::new(out, tag_of(v1, v2, "residue"))
}

/// Pearson correlations between column pairs of two projected blocks.
#[cfg(test)]
fn paired_correlations(a: &Mat, b: &Mat) -> alloc::vec::Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let x: alloc::vec::Vec<f64> = a.column(j).iter().copied().collect();
            let y: alloc::vec::Vec<f64> = b.column(j).iter().copied().collect();
            linalg::correlation(&x, &y)
        })
        .collect()
}
