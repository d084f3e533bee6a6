use alloc::vec::Vec;

use nalgebra::DVector;

use crate::embedding::{tag_of, EmbeddingSet, Mat};
use crate::error::{Error, Result};
use crate::linalg;

/// Largest training set accepted by `fit_kcca` (two dense n x n Gram matrices).
pub const DEFAULT_KERNEL_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KccaOptions {
    /// Gaussian bandwidth: `k(x, y) = exp(-|x - y|^2 / (2 sigma^2))`.
    pub sigma: f64,
    /// Ridge per training row; the Gram matrices get `reg * n` on the diagonal.
    pub reg: f64,
    pub n_components: Option<usize>,
    pub kernel_cap: usize,
}

impl KccaOptions {
    pub fn new(sigma: f64, reg: f64) -> Self {
        KccaOptions {
            sigma,
            reg,
            n_components: None,
            kernel_cap: DEFAULT_KERNEL_CAP,
        }
    }
}

/// Centring statistics of a training Gram matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelCentering {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub row_means: DVector<f64>,
    pub grand_mean: f64,
}

/// Fitted kernel CCA; projects new points through the retained training set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KccaCombiner {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub train_points1: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub train_points2: Mat,
    /// `n x d` dual coefficients, columns ordered by descending correlation.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub dual_coeffs1: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub dual_coeffs2: Mat,
    pub centering1: KernelCentering,
    pub centering2: KernelCentering,
    pub sigma: f64,
    pub reg: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub correlations: DVector<f64>,
}

pub fn gaussian_kernel(a: &Mat, b: &Mat, sigma: f64) -> Mat {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let na: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let nb: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let mut k = a * b.transpose();
    for j in 0..b.nrows() {
        for i in 0..a.nrows() {
            let d2 = (na[i] + nb[j] - 2.0 * k[(i, j)]).max(0.0);
            k[(i, j)] = libm::exp(-d2 * inv);
        }
    }
    k
}

fn centering_of(k: &Mat) -> KernelCentering {
    let n = k.nrows() as f64;
    let row_means = DVector::from_iterator(k.nrows(), k.row_iter().map(|r| r.sum() / n));
    let grand_mean = row_means.sum() / n;
    KernelCentering { row_means, grand_mean }
}

/// Centres kernel rows `k(x, train_j)` against the training Gram statistics.
fn center_rows(k: &mut Mat, c: &KernelCentering) {
    let m = k.ncols() as f64;
    for i in 0..k.nrows() {
        let rm = k.row(i).sum() / m;
        for j in 0..k.ncols() {
            k[(i, j)] += c.grand_mean - rm - c.row_means[j];
        }
    }
}

/// `(U diag(l / (l + kappa)) U^T, U, l)` of a centred Gram matrix.
fn shrink(kc: &Mat, kappa: f64) -> Result<(Mat, Mat, Vec<f64>)> {
    let eig = linalg::sym_eig(kc)?;
    let vals: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
    let mut scaled = eig.vectors.clone();
    for (j, l) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l / (l + kappa));
    }
    Ok((&scaled * eig.vectors.transpose(), eig.vectors, vals))
}

/// `U diag(1 / (l + kappa)) U^T a`.
fn ridge_solve(u: &Mat, vals: &[f64], kappa: f64, a: &Mat) -> Mat {
    let mut t = u.transpose() * a;
    for (i, l) in vals.iter().enumerate() {
        t.row_mut(i).scale_mut(1.0 / (l + kappa));
    }
    u * t
}

fn check_points(m: &Mat) -> Result<()> {
    for (idx, x) in m.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                row: idx % m.nrows(),
                col: idx / m.nrows(),
            });
        }
    }
    Ok(())
}

/// Regularized kernel CCA on double-centred Gaussian Gram matrices.
///
/// Maximises `a' K1 K2 b` subject to `a' (K1 + kI)^2 a = b' (K2 + kI)^2 b = 1`
/// with `k = reg * n`; substituting `p = (K1 + kI) a` reduces it to the SVD
/// of `R1 R2` where `R = K (K + kI)^-1`. Dual coefficients are rescaled so
/// the training canonical variates have unit variance.
pub fn fit_kcca(v1: &EmbeddingSet, v2: &EmbeddingSet, opts: KccaOptions) -> Result<KccaCombiner> {
    v2.require_rows(v1.n(), "fit_kcca row count")?;
    let n = v1.n();
    if n > opts.kernel_cap {
        return Err(Error::KernelCap { n, cap: opts.kernel_cap });
    }
    if n < 2 {
        return Err(Error::invalid("KCCA needs at least two rows"));
    }
    if !(opts.sigma > 0.0) || !(opts.reg > 0.0) {
        return Err(Error::invalid(alloc::format!(
            "KCCA sigma and reg must be positive, got sigma={} reg={}",
            opts.sigma,
            opts.reg
        )));
    }
    let max_k = v1.dim().min(v2.dim()).min(n);
    let k = opts.n_components.unwrap_or(max_k);
    if k == 0 || k > max_k {
        return Err(Error::invalid(alloc::format!("KCCA components must be in 1..={max_k}, got {k}")));
    }
    let x1 = v1.vectors().clone();
    let x2 = v2.vectors().clone();
    let mut k1 = gaussian_kernel(&x1, &x1, opts.sigma);
    let mut k2 = gaussian_kernel(&x2, &x2, opts.sigma);
    check_points(&k1)?;
    check_points(&k2)?;
    let c1 = centering_of(&k1);
    let c2 = centering_of(&k2);
    center_rows(&mut k1, &c1);
    center_rows(&mut k2, &c2);
    // exact symmetry for the eigensolver
    let k1 = (&k1 + k1.transpose()) * 0.5;
    let k2 = (&k2 + k2.transpose()) * 0.5;

    let kappa = opts.reg * n as f64;
    let (r1, u1, l1) = shrink(&k1, kappa)?;
    let (r2, u2, l2) = shrink(&k2, kappa)?;
    let dec = linalg::svd(&(&r1 * &r2))?;
    let p = dec.u.columns(0, k).into_owned();
    let q = dec.v.columns(0, k).into_owned();
    let mut a1 = ridge_solve(&u1, &l1, kappa, &p);
    let mut a2 = ridge_solve(&u2, &l2, kappa, &q);
    let var1 = &k1 * &a1;
    let var2 = &k2 * &a2;
    for j in 0..k {
        for (a, var) in [(&mut a1, &var1), (&mut a2, &var2)] {
            let sd = libm::sqrt(var.column(j).norm_squared() / (n as f64 - 1.0));
            if sd > 1e-12 {
                a.column_mut(j).scale_mut(1.0 / sd);
            }
        }
    }
    let correlations = DVector::from_iterator(k, dec.singular_values.iter().take(k).copied());
    Ok(KccaCombiner {
        train_points1: x1,
        train_points2: x2,
        dual_coeffs1: a1,
        dual_coeffs2: a2,
        centering1: c1,
        centering2: c2,
        sigma: opts.sigma,
        reg: opts.reg,
        correlations,
    })
}

impl KccaCombiner {
    pub fn components(&self) -> usize {
        self.correlations.len()
    }

    /// Canonical variates of view 1 (`first = true`) or view 2.
    pub fn project(&self, v: &EmbeddingSet, first: bool) -> Result<Mat> {
        let (pts, coeffs, cent) = if first {
            (&self.train_points1, &self.dual_coeffs1, &self.centering1)
        } else {
            (&self.train_points2, &self.dual_coeffs2, &self.centering2)
        };
        v.require_dim(pts.ncols(), "KCCA projection input dim")?;
        let mut k = gaussian_kernel(v.vectors(), pts, self.sigma);
        center_rows(&mut k, cent);
        Ok(k * coeffs)
    }
}

/// `1/2 g1(v1) + 1/2 g2(v2)` per row.
pub fn kcca_combine(c: &KccaCombiner, v1: &EmbeddingSet, v2: &EmbeddingSet) -> Result<EmbeddingSet> {
    v2.require_rows(v1.n(), "kcca_combine row count")?;
    let p1 = c.project(v1, true)?;
    let p2 = c.project(v2, false)?;
    EmbeddingSet::new((p1 + p2) * 0.5, tag_of(v1, v2, "kcca"))
}
