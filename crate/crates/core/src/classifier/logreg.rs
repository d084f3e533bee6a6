use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::embedding::{EmbeddingSet, Mat};
use crate::error::{Error, Result};

/// Full-batch L-BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OptimizerConfig {
    pub max_epochs: usize,
    /// Stop once the gradient infinity-norm drops below this.
    pub grad_tol: f64,
    /// Number of curvature pairs kept.
    pub memory: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_epochs: 2000,
            grad_tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TrainStop {
    Converged,
    MaxEpochs,
    /// Line search could not decrease the objective further.
    Stalled,
}

/// Softmax classifier `argmax(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearClassifier {
    /// `c x d`.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::mat"))]
    pub weights: Mat,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub bias: DVector<f64>,
    pub l2_penalty: f64,
    pub train_loss_history: Vec<f64>,
    pub stop: TrainStop,
}

impl LinearClassifier {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        LinearClassifier {
            weights: Mat::zeros(num_classes, dim),
            bias: DVector::zeros(num_classes),
            l2_penalty: 0.0,
            train_loss_history: Vec::new(),
            stop: TrainStop::Converged,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// `n x c` logits.
    pub fn logits(&self, x: &Mat) -> Mat {
        let mut z = x * self.weights.transpose();
        for (k, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.bias[k]);
        }
        z
    }
}

/// Row-wise softmax in place; returns per-row log-sum-exp.
pub(crate) fn softmax_rows(z: &mut Mat) -> Vec<f64> {
    let mut lse = Vec::with_capacity(z.nrows());
    for i in 0..z.nrows() {
        let m = z.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for k in 0..z.ncols() {
            let e = libm::exp(z[(i, k)] - m);
            z[(i, k)] = e;
            s += e;
        }
        for k in 0..z.ncols() {
            z[(i, k)] /= s;
        }
        lse.push(m + libm::log(s));
    }
    lse
}

fn unpack(theta: &[f64], c: usize, d: usize) -> (Mat, DVector<f64>) {
    let w = Mat::from_column_slice(c, d, &theta[..c * d]);
    let b = DVector::from_column_slice(&theta[c * d..]);
    (w, b)
}

/// Mean cross-entropy plus `(l2 / 2) |W|_F^2` and its gradient with respect
/// to `[vec(W), b]` (column-major `W`). Bias is not penalised.
pub fn objective(x: &Mat, y: &[usize], c: usize, l2: f64, theta: &[f64]) -> (f64, Vec<f64>) {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let (w, b) = unpack(theta, c, d);
    let clf = LinearClassifier {
        weights: w,
        bias: b,
        l2_penalty: l2,
        train_loss_history: Vec::new(),
        stop: TrainStop::Converged,
    };
    let mut p = clf.logits(x);
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        loss -= p[(i, yi)];
    }
    let lse = softmax_rows(&mut p);
    loss += lse.iter().sum::<f64>();
    loss /= n;
    loss += 0.5 * l2 * clf.weights.norm_squared();
    for (i, &yi) in y.iter().enumerate() {
        p[(i, yi)] -= 1.0;
    }
    let gw = p.transpose() * x / n + &clf.weights * l2;
    let mut grad = Vec::with_capacity(theta.len());
    grad.extend_from_slice(gw.as_slice());
    for k in 0..c {
        grad.push(p.column(k).sum() / n);
    }
    (loss, grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(libm::fabs(*x)))
}

/// Trains by full-batch L-BFGS with Armijo backtracking from zero weights.
/// Deterministic: no randomness is involved.
pub fn train_logreg(
    x: &EmbeddingSet,
    y: &[usize],
    num_classes: usize,
    l2: f64,
    opt: &OptimizerConfig,
) -> Result<LinearClassifier> {
    x.require_rows(y.len(), "train_logreg labels")?;
    if !(l2 >= 0.0) || !l2.is_finite() {
        return Err(Error::invalid(alloc::format!("l2 penalty must be non-negative, got {l2}")));
    }
    if num_classes < 2 || y.len() < num_classes {
        return Err(Error::invalid(alloc::format!(
            "need at least {num_classes} examples for {num_classes} classes, got {}",
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid(alloc::format!("label {bad} out of range {num_classes}")));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    let xm = x.vectors();
    let c = num_classes;
    let d = xm.ncols();
    let mut theta = vec![0.0; c * d + c];
    let (mut f, mut g) = objective(xm, y, c, l2, &theta);
    let mut history = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stop = TrainStop::MaxEpochs;
    for _ in 0..opt.max_epochs {
        if !f.is_finite() {
            return Err(Error::Numerical("non-finite training loss".into()));
        }
        if inf_norm(&g) < opt.grad_tol {
            stop = TrainStop::Converged;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, yv, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(yv) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match pairs.back() {
            Some((s, yv, _)) => dot(s, yv) / dot(yv, yv),
            None => 1.0 / inf_norm(&g).max(1.0),
        };
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, yv, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let bcoef = rho * dot(yv, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - bcoef) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = objective(xm, y, c, l2, &trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, ft, gt)) = accepted else {
            stop = TrainStop::Stalled;
            break;
        };
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).max(1e-300) {
            if pairs.len() == opt.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, yv, 1.0 / sy));
        }
        theta = trial;
        f = ft;
        g = gt;
        history.push(f);
    }
    if stop == TrainStop::MaxEpochs && inf_norm(&g) < opt.grad_tol {
        stop = TrainStop::Converged;
    }
    let (weights, bias) = unpack(&theta, c, d);
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("non-finite weights".into()));
    }
    Ok(LinearClassifier {
        weights,
        bias,
        l2_penalty: l2,
        train_loss_history: history,
        stop,
    })
}

/// Argmax of the logits; ties go to the lowest class index.
pub fn predict(clf: &LinearClassifier, x: &EmbeddingSet) -> Result<Vec<usize>> {
    x.require_dim(clf.dim(), "predict input dim")?;
    let z = clf.logits(x.vectors());
    Ok((0..z.nrows())
        .map(|i| {
            let mut best = 0;
            for k in 1..z.ncols() {
                if z[(i, k)] > z[(i, best)] {
                    best = k;
                }
            }
            best
        })
        .collect())
}

/// Fraction of exact matches.
pub fn evaluate(clf: &LinearClassifier, x: &EmbeddingSet, y: &[usize]) -> Result<f64> {
    x.require_rows(y.len(), "evaluate labels")?;
    let pred = predict(clf, x)?;
    Ok(accuracy(&pred, y))
}

pub(crate) fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn blobs(n: usize, seed: u64, sep: f64) -> (EmbeddingSet, Vec<usize>) {
        let mut r = rng::rng(seed);
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Mat::from_fn(n, 2, |i, _| rng::normal(&mut r) * 0.5 + if y[i] == 1 { sep } else { -sep });
        (EmbeddingSet::new(x, "blobs").unwrap(), y)
    }

    /// Central-difference gradient, independent of the analytic route.
    fn numeric_grad(x: &Mat, y: &[usize], c: usize, l2: f64, theta: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..theta.len())
            .map(|i| {
                let mut p = theta.to_vec();
                let mut m = theta.to_vec();
                p[i] += h;
                m[i] -= h;
                (objective(x, y, c, l2, &p).0 - objective(x, y, c, l2, &m).0) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(200, 1, 3.0);
        let clf = train_logreg(&x, &y, 2, 1e-4, &OptimizerConfig::default()).unwrap();
        assert_eq!(evaluate(&clf, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn permuted_labels_give_chance_accuracy() {
        let mut r = rng::rng(5);
        let n = 2000;
        let x = EmbeddingSet::new(Mat::from_fn(2 * n, 5, |_, _| rng::normal(&mut r)), "noise").unwrap();
        let mut y: Vec<usize> = (0..2 * n).map(|i| i % 2).collect();
        rng::shuffle(&mut r, &mut y);
        let train: Vec<usize> = (0..n).collect();
        let dev: Vec<usize> = (n..2 * n).collect();
        let ytr: Vec<usize> = train.iter().map(|&i| y[i]).collect();
        let ydev: Vec<usize> = dev.iter().map(|&i| y[i]).collect();
        let clf = train_logreg(&x.select(&train), &ytr, 2, 1e-2, &OptimizerConfig::default()).unwrap();
        let acc = evaluate(&clf, &x.select(&dev), &ydev).unwrap();
        assert!((0.4..=0.6).contains(&acc), "{acc}");
    }

    #[test]
    fn heavy_penalty_collapses_to_majority() {
        let (x, mut y) = blobs(100, 2, 2.0);
        // 70/30 imbalance
        for l in y.iter_mut().take(40) {
            *l = 0;
        }
        let clf = train_logreg(&x, &y, 2, 1e6, &OptimizerConfig::default()).unwrap();
        assert!(clf.weights.norm() < 1e-3);
        let pred = predict(&clf, &x).unwrap();
        assert!(pred.iter().all(|&p| p == 0));
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let clf = LinearClassifier::zeros(3, 2);
        let x = EmbeddingSet::from_rows(&[alloc::vec![1.0, -1.0], alloc::vec![5.0, 2.0]], "t").unwrap();
        assert_eq!(predict(&clf, &x).unwrap(), alloc::vec![0, 0]);
    }

    #[test]
    fn one_hot_weights_recover_axis_labels() {
        let mut clf = LinearClassifier::zeros(3, 3);
        clf.weights = Mat::identity(3, 3);
        let x = EmbeddingSet::from_rows(
            &[alloc::vec![0.0, 0.0, 2.0], alloc::vec![1.0, 0.0, 0.0], alloc::vec![0.0, 3.0, 0.0]],
            "t",
        )
        .unwrap();
        assert_eq!(predict(&clf, &x).unwrap(), alloc::vec![2, 0, 1]);
    }

    #[test]
    fn hand_computed_logits() {
        // W = [[1, -1], [0.5, 2]], b = [0.25, -1]
        // row (2, 1):  z = (1.25, 2.0)  -> 1
        // row (1, -1): z = (2.25, -2.5) -> 0
        // row (0, 0.5): z = (-0.25, 0.0) -> 1
        let mut clf = LinearClassifier::zeros(2, 2);
        clf.weights = Mat::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]);
        clf.bias = DVector::from_vec(alloc::vec![0.25, -1.0]);
        let x = EmbeddingSet::from_rows(
            &[alloc::vec![2.0, 1.0], alloc::vec![1.0, -1.0], alloc::vec![0.0, 0.5]],
            "t",
        )
        .unwrap();
        assert_eq!(predict(&clf, &x).unwrap(), alloc::vec![1, 0, 1]);
        // fixed 3-row fixture, labels [1, 0, 0] -> 2/3
        assert!((evaluate(&clf, &x, &[1, 0, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(evaluate(&clf, &x, &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(evaluate(&clf, &x, &[0, 1, 0]).unwrap(), 0.0);
    }

    #[test]
    fn bias_shift_leaves_predictions() {
        let (x, y) = blobs(50, 3, 1.0);
        let mut clf = train_logreg(&x, &y, 2, 1e-3, &OptimizerConfig::default()).unwrap();
        let before = predict(&clf, &x).unwrap();
        clf.bias.add_scalar_mut(17.5);
        assert_eq!(predict(&clf, &x).unwrap(), before);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut r = rng::rng(9);
        let x = Mat::from_fn(30, 4, |_, _| rng::normal(&mut r));
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let theta: Vec<f64> = (0..15).map(|_| rng::normal(&mut r) * 0.3).collect();
        let (_, g) = objective(&x, &y, 3, 0.1, &theta);
        let ng = numeric_grad(&x, &y, 3, 0.1, &theta);
        for (a, b) in g.iter().zip(&ng) {
            assert!((a - b).abs() / a.abs().max(b.abs()).max(1e-8) < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn converges_to_stationary_point() {
        let mut r = rng::rng(10);
        let x = EmbeddingSet::new(Mat::from_fn(120, 4, |_, _| rng::normal(&mut r)), "t").unwrap();
        let y: Vec<usize> = (0..120)
            .map(|i| if x.vectors()[(i, 0)] + 0.5 * rng::normal(&mut r) > 0.0 { 1 } else { (i % 3 == 0) as usize * 2 })
            .collect();
        let clf = train_logreg(&x, &y, 3, 1e-2, &OptimizerConfig::default()).unwrap();
        assert_eq!(clf.stop, TrainStop::Converged);
        let mut theta: Vec<f64> = clf.weights.as_slice().to_vec();
        theta.extend(clf.bias.iter());
        let (_, g) = objective(x.vectors(), &y, 3, 1e-2, &theta);
        assert!(inf_norm(&g) < 1e-5);
        let ng = numeric_grad(x.vectors(), &y, 3, 1e-2, &theta);
        assert!(inf_norm(&ng) < 1e-5);
        let h = &clf.train_loss_history;
        let tail = &h[h.len().saturating_sub(10)..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    }

    #[test]
    fn larger_penalty_shrinks_weights() {
        let (x, y) = blobs(80, 4, 1.0);
        let mut prev = f64::INFINITY;
        for l2 in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
            let clf = train_logreg(&x, &y, 2, l2, &OptimizerConfig::default()).unwrap();
            let w = clf.weights.norm();
            assert!(w <= prev + 1e-8);
            prev = w;
        }
    }

    #[test]
    fn training_errors() {
        let (x, _) = blobs(10, 5, 1.0);
        assert!(train_logreg(&x, &[0; 10], 2, 1e-3, &OptimizerConfig::default()).is_err());
        assert!(train_logreg(&x, &[0, 1], 2, 1e-3, &OptimizerConfig::default()).is_err());
        let clf = LinearClassifier::zeros(2, 3);
        assert!(predict(&clf, &x).is_err());
    }
}
