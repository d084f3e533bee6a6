use alloc::vec::Vec;

use nalgebra::DVector;

use crate::classifier::{evaluate, train_logreg, OptimizerConfig};
use crate::combiner::{cat_combine, cca_combine, fit_cca, residue_combine, CcaOptions};
use crate::embedding::{EmbeddingSet, Mat};
use crate::error::{Error, Result};
use crate::linalg;

use super::world::{sample_world, SyntheticWorld};

/// Noiseless world on `d + 2` latent coordinates where each view misses one
/// of the two label-carrying coordinates and both share the remaining `d`:
/// `P1 = diag(1, 0, 1, ..., 1)`, `P2 = diag(0, 1, 1, ..., 1)`,
/// `w* = [1, 1, 0, ..., 0]`.
pub fn theorem2_world(d: usize) -> Result<SyntheticWorld> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    let k = d + 2;
    let diag = |skip: usize| Mat::from_diagonal(&DVector::from_fn(k, |i, _| if i == skip { 0.0 } else { 1.0 }));
    let w = DVector::from_fn(k, |i, _| if i < 2 { 1.0 } else { 0.0 });
    SyntheticWorld::new(w, diag(1), diag(0), 0.0, 0.0)
}

/// Fraction of rows on which the hand-built linear rule on `[v1, v2]` with
/// weight 1 on coordinate 0 of `v1` and on coordinate 1 of `v2` agrees with
/// the true label.
pub fn hand_classifier_agreement(v1: &EmbeddingSet, v2: &EmbeddingSet, labels: &[usize]) -> f64 {
    let (a, b) = (v1.vectors(), v2.vectors());
    let hits = (0..labels.len())
        .filter(|&i| usize::from(a[(i, 0)] + b[(i, 1)] >= 0.0) == labels[i])
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem2Options {
    pub cca_reg: f64,
    pub l2: f64,
}

impl Default for Theorem2Options {
    fn default() -> Self {
        Theorem2Options { cca_reg: 1e-6, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Theorem2Report {
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub acc_cat: f64,
    pub acc_cca: f64,
    pub acc_residue: f64,
    pub correlations: Vec<f64>,
    /// Share of each projection's Frobenius norm on latent coordinates 0 and 1.
    pub phi_leak: [f64; 2],
    /// Principal-angle cosines between each projection's row space and the
    /// shared coordinates `2..d+2`.
    pub shared_cosines: [Vec<f64>; 2],
    pub hand_agreement: f64,
}

/// Trains CAT, CCA and residue pipelines on the noiseless world and reports
/// test accuracies. CCA keeps the `d` shared directions.
pub fn verify_theorem2(d: usize, n_train: usize, n_test: usize, seed: u64, opts: &Theorem2Options) -> Result<Theorem2Report> {
    if n_train < 100 * (d + 2) {
        return Err(Error::invalid(alloc::format!(
            "n_train must be at least {} for d = {d}",
            100 * (d + 2)
        )));
    }
    if n_test == 0 {
        return Err(Error::invalid("n_test must be positive"));
    }
    let world = theorem2_world(d)?;
    let all = sample_world(&world, n_train + n_test, seed)?;
    let train: Vec<usize> = (0..n_train).collect();
    let test: Vec<usize> = (n_train..n_train + n_test).collect();
    let (v1_tr, v2_tr) = (all.v1.select(&train), all.v2.select(&train));
    let (v1_te, v2_te) = (all.v1.select(&test), all.v2.select(&test));
    let (y_tr, y_te) = (
        train.iter().map(|&i| all.labels[i]).collect::<Vec<_>>(),
        test.iter().map(|&i| all.labels[i]).collect::<Vec<_>>(),
    );
    let opt = OptimizerConfig::default();
    let fit_eval = |xtr: &EmbeddingSet, xte: &EmbeddingSet| -> Result<f64> {
        let clf = train_logreg(xtr, &y_tr, 2, opts.l2, &opt)?;
        evaluate(&clf, xte, &y_te)
    };

    let acc_cat = fit_eval(&cat_combine(&v1_tr, &v2_tr, 1.0)?, &cat_combine(&v1_te, &v2_te, 1.0)?)?;
    let cca = fit_cca(
        &v1_tr,
        &v2_tr,
        CcaOptions {
            n_components: Some(d),
            ..CcaOptions::new(opts.cca_reg)
        },
    )?;
    let acc_cca = fit_eval(&cca_combine(&cca, &v1_tr, &v2_tr)?, &cca_combine(&cca, &v1_te, &v2_te)?)?;
    let acc_residue = fit_eval(&residue_combine(&cca, &v1_tr, &v2_tr)?, &residue_combine(&cca, &v1_te, &v2_te)?)?;

    let leak = |phi: &Mat| {
        let head = phi.columns(0, 2).norm();
        let total = phi.norm();
        if total > 0.0 {
            head / total
        } else {
            0.0
        }
    };
    let shared = Mat::from_fn(d + 2, d, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
    let cos1 = linalg::principal_angle_cosines(&cca.phi1.transpose(), &shared)?;
    let cos2 = linalg::principal_angle_cosines(&cca.phi2.transpose(), &shared)?;

    Ok(Theorem2Report {
        d,
        n_train,
        n_test,
        seed,
        acc_cat,
        acc_cca,
        acc_residue,
        correlations: cca.correlations.iter().copied().collect(),
        phi_leak: [leak(&cca.phi1), leak(&cca.phi2)],
        shared_cosines: [cos1, cos2],
        hand_agreement: hand_classifier_agreement(&v1_te, &v2_te, &y_te),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_for_d1() {
        let w = theorem2_world(1).unwrap();
        assert_eq!(w.p1, Mat::from_diagonal(&DVector::from_vec(alloc::vec![1.0, 0.0, 1.0])));
        assert_eq!(w.p2, Mat::from_diagonal(&DVector::from_vec(alloc::vec![0.0, 1.0, 1.0])));
        assert_eq!(w.w_star.as_slice(), &[1.0, 1.0, 0.0]);
        assert!(w.require_full_column_rank(1e-10).is_ok());
        assert!(theorem2_world(0).is_err());
    }

    #[test]
    fn hand_rule_reproduces_labels() {
        let w = theorem2_world(4).unwrap();
        let s = sample_world(&w, 500, 3).unwrap();
        assert_eq!(hand_classifier_agreement(&s.v1, &s.v2, &s.labels), 1.0);
    }

    #[test]
    fn cca_drops_the_label_coordinates() {
        let rep = verify_theorem2(3, 2000, 1000, 5, &Theorem2Options::default()).unwrap();
        assert!(rep.acc_cat >= 0.97, "{rep:?}");
        assert!(rep.acc_residue >= 0.97, "{rep:?}");
        assert!((0.42..=0.58).contains(&rep.acc_cca), "{rep:?}");
        assert!(rep.correlations.iter().all(|&c| c > 0.999));
        assert!(rep.phi_leak[0] < 0.05 && rep.phi_leak[1] < 0.05);
        assert!(rep.shared_cosines.iter().flatten().all(|&c| c > 0.999));
    }

    #[test]
    fn rejects_small_training_sets() {
        assert!(verify_theorem2(8, 999, 100, 0, &Theorem2Options::default()).is_err());
    }
}
