//! Dense linear-algebra kernel on top of `nalgebra`: ordered symmetric
//! eigendecomposition, thin SVD, Moore-Penrose pseudo-inverse and ridge
//! whitening, each checked against an accuracy contract in the tests.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::embedding::Mat;
use crate::error::{Error, Result};

/// Default relative cut-off for treating singular values as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 10_000;

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: Mat,
}

/// Thin SVD `A = U diag(s) V^T`, singular values descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Mat,
    pub singular_values: DVector<f64>,
    pub v: Mat,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

pub fn asymmetry(a: &Mat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max(libm::fabs(a[(i, j)] - a[(j, i)]));
        }
    }
    worst
}

/// Indices sorting `values` descending; equal values keep their original order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    order
}

fn permute_columns(m: &Mat, order: &[usize]) -> Mat {
    Mat::from_fn(m.nrows(), order.len(), |i, j| m[(i, order[j])])
}

pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
            context: "sym_eig needs a square matrix",
        });
    }
    let scale = max_abs(a).max(1.0);
    let asym = asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let order = descending_order(&vals);
    Ok(SymEig {
        values: DVector::from_iterator(order.len(), order.iter().map(|&i| vals[i])),
        vectors: permute_columns(&eig.eigenvectors, &order),
    })
}

pub fn svd(a: &Mat) -> Result<SvdResult> {
    if let Some(bad) = a.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            row: bad % a.nrows().max(1),
            col: bad / a.nrows().max(1),
        });
    }
    let r = a.nrows().min(a.ncols());
    if r == 0 {
        return Ok(SvdResult {
            u: Mat::zeros(a.nrows(), 0),
            singular_values: DVector::zeros(0),
            v: Mat::zeros(a.ncols(), 0),
        });
    }
    let dec = a
        .clone()
        .try_svd(true, true, f64::EPSILON, MAX_SWEEPS)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = dec.u.expect("requested U");
    let v = dec.v_t.expect("requested V^T").transpose();
    let vals: Vec<f64> = dec.singular_values.iter().copied().collect();
    let order = descending_order(&vals);
    Ok(SvdResult {
        u: permute_columns(&u, &order),
        singular_values: DVector::from_iterator(r, order.iter().map(|&i| vals[i].max(0.0))),
        v: permute_columns(&v, &order),
    })
}

/// Moore-Penrose pseudo-inverse. Singular values at or below
/// `rank_tol * sigma_max` are treated as zero.
pub fn pseudo_inverse(a: &Mat, rank_tol: f64) -> Result<Mat> {
    if !(rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    let dec = svd(a)?;
    let mut out = Mat::zeros(a.ncols(), a.nrows());
    let smax = dec.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(out);
    }
    for (k, s) in dec.singular_values.iter().enumerate() {
        if *s > rank_tol * smax {
            let vk = dec.v.column(k);
            let uk = dec.u.column(k);
            out += (vk * uk.transpose()) / *s;
        }
    }
    Ok(out)
}

/// Smallest singular value of `a` (0 for an empty matrix).
pub fn min_singular_value(a: &Mat) -> Result<f64> {
    let dec = svd(a)?;
    Ok(dec.singular_values.iter().copied().fold(f64::INFINITY, f64::min).min(f64::MAX))
}

/// Symmetric `W = (cov + ridge I)^{-1/2}`, so `W (cov + ridge I) W^T = I`.
/// Ridges below 1e-12 are raised to 1e-12.
pub fn whiten(cov: &Mat, ridge: f64) -> Result<Mat> {
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::invalid(alloc::format!("ridge must be non-negative, got {ridge}")));
    }
    let ridge = ridge.max(1e-12);
    let eig = sym_eig(cov)?;
    let lmin = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < -1e-8 {
        return Err(Error::NotPsd(lmin));
    }
    let d = cov.nrows();
    let mut scaled = eig.vectors.clone();
    for j in 0..d {
        let l = eig.values[j].max(0.0) + ridge;
        scaled.column_mut(j).scale_mut(1.0 / libm::sqrt(l));
    }
    Ok(&scaled * eig.vectors.transpose())
}

pub fn column_means(x: &Mat) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// `x` with `mean` subtracted from every row.
pub fn center(x: &Mat, mean: &DVector<f64>) -> Mat {
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    out
}

/// `x^T y / (n - 1)` for already-centred `x`, `y`.
pub fn cross_cov(xc: &Mat, yc: &Mat) -> Mat {
    let denom = (xc.nrows().max(2) - 1) as f64;
    xc.transpose() * yc / denom
}

/// Pearson correlation of two equal-length samples (0 when either is constant).
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / libm::sqrt(saa * sbb)
}

/// Orthonormal basis of the column space of `a` (columns with singular
/// value above `rank_tol * sigma_max`).
pub fn orthonormal_basis(a: &Mat, rank_tol: f64) -> Result<Mat> {
    let dec = svd(a)?;
    let smax = dec.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..dec.rank())
        .filter(|&k| dec.singular_values[k] > rank_tol * smax && smax > 0.0)
        .collect();
    Ok(permute_columns(&dec.u, &keep))
}

/// Cosines of the principal angles between the column spaces of `a` and `b`,
/// descending (1 means a shared direction).
pub fn principal_angle_cosines(a: &Mat, b: &Mat) -> Result<Vec<f64>> {
    let qa = orthonormal_basis(a, 1e-10)?;
    let qb = orthonormal_basis(b, 1e-10)?;
    let m = qa.transpose() * qb;
    Ok(svd(&m)?.singular_values.iter().map(|s| s.min(1.0)).collect())
}
