use alloc::vec::Vec;

use nalgebra::DVector;

use crate::embedding::{EmbeddingSet, Mat};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

/// Latent-variable world: `v* ~ N(0, I)`, `v_i = P_i v* + eps_i`, label 1
/// iff `<w*, v*> >= 0`. Noise is isotropic within a view with total variance
/// `E|eps_i|^2 = sigma_i^2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticWorld {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub w_star: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub p1: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub p2: Mat,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SyntheticWorld {
    pub fn new(w_star: DVector<f64>, p1: Mat, p2: Mat, sigma1: f64, sigma2: f64) -> Result<Self> {
        let k = w_star.len();
        if k == 0 {
            return Err(Error::invalid("w* must be non-empty"));
        }
        for (p, name) in [(&p1, "P1 columns"), (&p2, "P2 columns")] {
            if p.ncols() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: p.ncols(),
                    context: name,
                });
            }
            if p.nrows() == 0 {
                return Err(Error::invalid("projection with no rows"));
            }
        }
        if !(sigma1 >= 0.0 && sigma2 >= 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(Error::invalid("noise levels must be finite and non-negative"));
        }
        Ok(SyntheticWorld {
            w_star,
            p1,
            p2,
            sigma1,
            sigma2,
        })
    }

    pub fn dim_star(&self) -> usize {
        self.w_star.len()
    }

    pub fn d1(&self) -> usize {
        self.p1.nrows()
    }

    pub fn d2(&self) -> usize {
        self.p2.nrows()
    }

    /// `sqrt(sigma1^2 + sigma2^2)`.
    pub fn sigma(&self) -> f64 {
        libm::hypot(self.sigma1, self.sigma2)
    }

    /// `[P1; P2]`.
    pub fn stacked(&self) -> Mat {
        let (d1, d2, k) = (self.d1(), self.d2(), self.dim_star());
        Mat::from_fn(d1 + d2, k, |i, j| if i < d1 { self.p1[(i, j)] } else { self.p2[(i - d1, j)] })
    }

    pub fn require_full_column_rank(&self, rank_tol: f64) -> Result<()> {
        let s = linalg::min_singular_value(&self.stacked())?;
        if s > rank_tol && self.d1() + self.d2() >= self.dim_star() {
            Ok(())
        } else {
            Err(Error::RankDeficient(s))
        }
    }
}

/// One draw from a world; `labels` are 0/1.
#[derive(Debug, Clone)]
pub struct WorldSample {
    pub v1: EmbeddingSet,
    pub v2: EmbeddingSet,
    pub vstar: EmbeddingSet,
    pub labels: Vec<usize>,
}

/// `n` i.i.d. rows. Each row consumes `dim*`, then `d1`, then `d2` normals,
/// so worlds of equal shape see identical latent and noise draws.
pub fn sample_world(w: &SyntheticWorld, n: usize, seed: u64) -> Result<WorldSample> {
    draw(w, n, seed, false)
}

/// Like [`sample_world`] but the second half of the rows repeats the first
/// half's latents with negated noise. `n` must be even.
pub fn sample_world_antithetic(w: &SyntheticWorld, n: usize, seed: u64) -> Result<WorldSample> {
    if n % 2 != 0 {
        return Err(Error::invalid("antithetic sampling needs an even n"));
    }
    draw(w, n, seed, true)
}

fn draw(w: &SyntheticWorld, n: usize, seed: u64, antithetic: bool) -> Result<WorldSample> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let (k, d1, d2) = (w.dim_star(), w.d1(), w.d2());
    let s1 = w.sigma1 / libm::sqrt(d1 as f64);
    let s2 = w.sigma2 / libm::sqrt(d2 as f64);
    let mut r = rng::rng(seed);
    let mut vstar = Mat::zeros(n, k);
    let mut e1 = Mat::zeros(n, d1);
    let mut e2 = Mat::zeros(n, d2);
    let fresh = if antithetic { n / 2 } else { n };
    for i in 0..fresh {
        for j in 0..k {
            vstar[(i, j)] = rng::normal(&mut r);
        }
        for j in 0..d1 {
            e1[(i, j)] = s1 * rng::normal(&mut r);
        }
        for j in 0..d2 {
            e2[(i, j)] = s2 * rng::normal(&mut r);
        }
    }
    for i in fresh..n {
        let src = i - fresh;
        for j in 0..k {
            vstar[(i, j)] = vstar[(src, j)];
        }
        for j in 0..d1 {
            e1[(i, j)] = -e1[(src, j)];
        }
        for j in 0..d2 {
            e2[(i, j)] = -e2[(src, j)];
        }
    }
    let v1 = &vstar * w.p1.transpose() + e1;
    let v2 = &vstar * w.p2.transpose() + e2;
    let scores = &vstar * &w.w_star;
    let labels = scores.iter().map(|&s| usize::from(s >= 0.0)).collect();
    Ok(WorldSample {
        v1: EmbeddingSet::new(v1, "world-v1")?,
        v2: EmbeddingSet::new(v2, "world-v2")?,
        vstar: EmbeddingSet::new(vstar, "world-vstar")?,
        labels,
    })
}
