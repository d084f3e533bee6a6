use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng as _;

use crate::embedding::Mat;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

use super::world::{sample_world, sample_world_antithetic, SyntheticWorld};

/// Margin losses, both 1-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Loss {
    Logistic,
    Hinge,
}

impl Loss {
    pub fn lipschitz(self) -> f64 {
        1.0
    }

    pub fn eval(self, margin: f64) -> f64 {
        match self {
            Loss::Logistic => {
                if margin > 0.0 {
                    libm::log1p(libm::exp(-margin))
                } else {
                    -margin + libm::log1p(libm::exp(margin))
                }
            }
            Loss::Hinge => (1.0 - margin).max(0.0),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "logistic" => Ok(Loss::Logistic),
            "hinge" => Ok(Loss::Hinge),
            other => Err(Error::invalid(alloc::format!("unknown loss {other:?}"))),
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_err: libm::sqrt(var / n),
        }
    }
}

/// One inequality `lhs <= rhs + slack`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl Check {
    fn new(name: &str, lhs: f64, rhs: f64, slack: f64) -> Self {
        Check {
            name: name.into(),
            lhs,
            rhs,
            slack,
            holds: lhs <= rhs + slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Options {
    pub n: usize,
    pub loss: Loss,
    /// Pair every draw with its noise-negated twin.
    pub antithetic: bool,
    pub rank_tol: f64,
}

impl Default for Theorem1Options {
    fn default() -> Self {
        Theorem1Options {
            n: 100_000,
            loss: Loss::Logistic,
            antithetic: false,
            rank_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theorem1Report {
    pub n: usize,
    pub seed: u64,
    pub loss: Loss,
    pub lambda: f64,
    pub sigma: f64,
    /// `|(P^+)^T w*|_2`.
    pub w_bar_norm: f64,
    pub loss_fstar: Estimate,
    pub loss_fbar: Estimate,
    /// Paired estimate of `L(f_bar) - L(f*)`.
    pub excess: Estimate,
    /// `L(f*) + lambda sigma |(P^+)^T w*|`, with the Monte Carlo `L(f*)`.
    pub bound_rhs: f64,
    pub mean_abs_gap: f64,
    pub rms_gap: f64,
    pub checks: Vec<Check>,
    /// Set when the world is noiseless; the two classifiers then coincide.
    pub noiseless_gap: Option<f64>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Builds `f_bar` with weights `(P^+)^T w*` on the concatenated views and
/// compares its loss with that of `f*` by Monte Carlo. The bound itself and
/// each step of its derivation (Lipschitz, Jensen, Cauchy-Schwarz) are
/// checked, with 3 standard errors of slack where the step is stochastic.
pub fn verify_theorem1(w: &SyntheticWorld, opts: &Theorem1Options, seed: u64) -> Result<Theorem1Report> {
    w.require_full_column_rank(opts.rank_tol)?;
    let p = w.stacked();
    let w_bar = linalg::pseudo_inverse(&p, opts.rank_tol)?.transpose() * &w.w_star;
    let sample = if opts.antithetic {
        sample_world_antithetic(w, opts.n, seed)?
    } else {
        sample_world(w, opts.n, seed)?
    };
    let d1 = w.d1();
    let (wb1, wb2) = (w_bar.rows(0, d1).into_owned(), w_bar.rows(d1, w.d2()).into_owned());
    let f_bar: DVector<f64> = sample.v1.vectors() * wb1 + sample.v2.vectors() * wb2;
    let f_star: DVector<f64> = sample.vstar.vectors() * &w.w_star;

    let n = opts.n;
    let mut lb = Vec::with_capacity(n);
    let mut ls = Vec::with_capacity(n);
    let mut diff = Vec::with_capacity(n);
    let mut gap_abs = Vec::with_capacity(n);
    let mut gap_sq = Vec::with_capacity(n);
    for i in 0..n {
        let y = if sample.labels[i] == 1 { 1.0 } else { -1.0 };
        let a = opts.loss.eval(y * f_bar[i]);
        let b = opts.loss.eval(y * f_star[i]);
        let g = f_bar[i] - f_star[i];
        lb.push(a);
        ls.push(b);
        diff.push(a - b);
        gap_abs.push(libm::fabs(g));
        gap_sq.push(g * g);
    }
    let loss_fbar = Estimate::of(&lb);
    let loss_fstar = Estimate::of(&ls);
    let excess = Estimate::of(&diff);
    let lambda = opts.loss.lipschitz();
    let sigma = w.sigma();
    let w_bar_norm = w_bar.norm();
    let bound = lambda * sigma * w_bar_norm;
    let mean_abs_gap = gap_abs.iter().sum::<f64>() / n as f64;
    let sq = Estimate::of(&gap_sq);
    let rms_gap = libm::sqrt(sq.mean);
    let rms_se = if rms_gap > 0.0 { sq.std_err / (2.0 * rms_gap) } else { 0.0 };
    let exact = 1e-12 * (1.0 + bound);

    let mut checks = alloc::vec![
        Check::new("bound", excess.mean, bound, 3.0 * excess.std_err + exact),
        Check::new("lipschitz", libm::fabs(excess.mean), lambda * mean_abs_gap, exact),
        Check::new("jensen", mean_abs_gap, rms_gap, exact),
        Check::new("cauchy_schwarz", rms_gap, w_bar_norm * sigma, 3.0 * rms_se + exact),
    ];
    let noiseless_gap = (sigma == 0.0).then(|| libm::fabs(loss_fbar.mean - loss_fstar.mean));
    if let Some(g) = noiseless_gap {
        checks.push(Check::new("noiseless", g, 0.0, 1e-10));
    }
    Ok(Theorem1Report {
        n,
        seed,
        loss: opts.loss,
        lambda,
        sigma,
        w_bar_norm,
        loss_fstar,
        loss_fbar,
        excess,
        bound_rhs: loss_fstar.mean + bound,
        mean_abs_gap,
        rms_gap,
        checks,
        noiseless_gap,
    })
}

/// Diagonal example: `P1 = diag(c, 0, 1, 0)`, `P2 = diag(0, c, 0, 1)`,
/// `w* = [1, 1, 0, 0]`, total noise `sigma` split evenly between the views.
pub fn diagonal_world(c: f64, sigma: f64) -> Result<SyntheticWorld> {
    if !(c > 0.0) {
        return Err(Error::invalid("c must be positive"));
    }
    let p1 = Mat::from_diagonal(&DVector::from_vec(alloc::vec![c, 0.0, 1.0, 0.0]));
    let p2 = Mat::from_diagonal(&DVector::from_vec(alloc::vec![0.0, c, 0.0, 1.0]));
    let w = DVector::from_vec(alloc::vec![1.0, 1.0, 0.0, 0.0]);
    let s = sigma / core::f64::consts::SQRT_2;
    SyntheticWorld::new(w, p1, p2, s, s)
}

/// Random world with Gaussian `P` of full column rank, Gaussian `w*` and
/// total noise `sigma`, split between the views at a random angle.
pub fn random_world(sigma: f64, seed: u64) -> Result<SyntheticWorld> {
    let mut r = rng::rng(seed);
    loop {
        let k = r.random_range(2..=6);
        let d1 = r.random_range(1..=6);
        let d2 = r.random_range(1..=6);
        if d1 + d2 < k {
            continue;
        }
        let p1 = Mat::from_fn(d1, k, |_, _| rng::normal(&mut r));
        let p2 = Mat::from_fn(d2, k, |_, _| rng::normal(&mut r));
        let w = DVector::from_fn(k, |_, _| rng::normal(&mut r));
        let theta = r.random_range(0.0..core::f64::consts::FRAC_PI_2);
        let world = SyntheticWorld::new(w, p1, p2, sigma * libm::cos(theta), sigma * libm::sin(theta))?;
        if world.require_full_column_rank(1e-3).is_ok() {
            return Ok(world);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub c: f64,
    pub w_bar_norm: f64,
    /// `sqrt(2) / c`.
    pub expected_norm: f64,
    pub excess: Estimate,
    pub bound: f64,
}

/// Excess loss of `f_bar` over `f*` across `c` on the diagonal example.
/// All `c` share the same draws and use antithetic noise, so the measured
/// curve is a symmetric convex function of the noise scale `sigma / c`.
pub fn sweep_c(cs: &[f64], sigma: f64, n: usize, loss: Loss, seed: u64) -> Result<Vec<SweepRow>> {
    let opts = Theorem1Options {
        n,
        loss,
        antithetic: true,
        ..Theorem1Options::default()
    };
    cs.iter()
        .map(|&c| {
            let rep = verify_theorem1(&diagonal_world(c, sigma)?, &opts, seed)?;
            Ok(SweepRow {
                c,
                w_bar_norm: rep.w_bar_norm,
                expected_norm: core::f64::consts::SQRT_2 / c,
                excess: rep.excess,
                bound: rep.lambda * rep.sigma * rep.w_bar_norm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Theorem1Options {
        Theorem1Options {
            n: 20_000,
            ..Theorem1Options::default()
        }
    }

    #[test]
    fn noiseless_classifiers_coincide() {
        let w = random_world(0.0, 3).unwrap();
        let rep = verify_theorem1(&w, &small(), 1).unwrap();
        assert!(rep.noiseless_gap.unwrap() < 1e-10);
        assert!(rep.passed(), "{:?}", rep.checks);
    }

    #[test]
    fn bound_holds_on_random_worlds() {
        for i in 0..10 {
            let w = random_world(0.2 * i as f64, 100 + i).unwrap();
            for loss in [Loss::Logistic, Loss::Hinge] {
                let rep = verify_theorem1(&w, &Theorem1Options { loss, ..small() }, i).unwrap();
                assert!(rep.passed(), "world {i}: {:?}", rep.checks);
                assert!(rep.bound_rhs >= rep.loss_fstar.mean);
            }
        }
    }

    #[test]
    fn a1_norm_is_root_two_over_c() {
        for c in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let w = diagonal_world(c, 1.0).unwrap();
            let p = w.stacked();
            let wb = linalg::pseudo_inverse(&p, 1e-12).unwrap().transpose() * &w.w_star;
            assert!((wb.norm() - core::f64::consts::SQRT_2 / c).abs() < 1e-12);
            // (P^+)^T w* = [1/c, 0, 0, 0, 0, 1/c, 0, 0]
            for (i, v) in wb.iter().enumerate() {
                let expect = if i == 0 || i == 5 { 1.0 / c } else { 0.0 };
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_is_nonincreasing_in_c() {
        let rows = sweep_c(&[0.25, 0.5, 1.0, 2.0, 4.0], 1.0, 20_000, Loss::Logistic, 7).unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].excess.mean <= pair[0].excess.mean, "{pair:?}");
        }
        assert!(rows[0].excess.mean > 0.1);
    }

    #[test]
    fn logistic_loss_is_stable() {
        assert!((Loss::Logistic.eval(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(Loss::Logistic.eval(800.0) >= 0.0);
        assert!((Loss::Logistic.eval(-800.0) - 800.0).abs() < 1e-9);
        assert_eq!(Loss::Hinge.eval(2.0), 0.0);
        assert!(Loss::parse("squared").is_err());
    }

    #[test]
    fn rejects_rank_deficient_world() {
        let w = SyntheticWorld::new(DVector::from_element(3, 1.0), Mat::zeros(1, 3), Mat::zeros(1, 3), 0.0, 0.0).unwrap();
        assert!(verify_theorem1(&w, &small(), 0).is_err());
    }

    #[test]
    fn estimate_matches_hand_values() {
        let e = Estimate::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - libm::sqrt(5.0 / 3.0 / 4.0)).abs() < 1e-15);
    }
}
