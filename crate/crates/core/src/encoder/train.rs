//! Mini-batch training of the text-CNN, alone (domain encoder) and jointly
//! with a classifier over `[v1, alpha * cnn(s)]` where `v1` is a fixed view.

use alloc::vec;
use alloc::vec::Vec;

use crate::classifier::{train_logreg, LinearClassifier, OptimizerConfig};
use crate::dataset::LabeledDataset;
use crate::embedding::{EmbeddingSet, Mat};
use crate::error::{Error, Result};
use crate::rng;

use super::cnn::{joint_forward_backward, Batch, CnnConfig, EmbeddingMode, JointGrads, TextCnn};
use super::vocab::Vocabulary;
use super::wordvec::WordVectors;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Penalty on the head weights only.
    pub head_l2: f64,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            head_l2: 1e-4,
            patience: 3,
        }
    }
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            t: 0,
            m: sizes.iter().map(|&s| vec![0.0; s]).collect(),
            v: sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    fn tick(&mut self) {
        self.t += 1;
    }

    fn update(&mut self, slot: usize, params: &mut [f64], grad: &[f64]) {
        let c1 = 1.0 - libm::pow(Self::B1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::B2, self.t as f64);
        let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
        for i in 0..params.len() {
            let g = grad[i];
            m[i] = Self::B1 * m[i] + (1.0 - Self::B1) * g;
            v[i] = Self::B2 * v[i] + (1.0 - Self::B2) * g * g;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            params[i] -= self.lr * mh / (libm::sqrt(vh) + Self::EPS);
        }
    }
}

fn slot_sizes(cnn: &TextCnn, head: &LinearClassifier) -> Vec<usize> {
    let mut s = vec![cnn.embeddings.len()];
    for b in &cnn.banks {
        s.push(b.weights.len());
        s.push(b.bias.len());
    }
    s.push(head.weights.len());
    s.push(head.bias.len());
    s
}

fn apply(adam: &mut Adam, cnn: &mut TextCnn, head: &mut LinearClassifier, g: &JointGrads) {
    adam.tick();
    if cnn.mode.trains_embeddings() {
        adam.update(0, &mut cnn.embeddings, &g.cnn.embeddings);
    }
    let mut slot = 1;
    for (bank, (gw, gb)) in cnn.banks.iter_mut().zip(&g.cnn.banks) {
        adam.update(slot, &mut bank.weights, gw);
        adam.update(slot + 1, &mut bank.bias, gb);
        slot += 2;
    }
    adam.update(slot, head.weights.as_mut_slice(), g.head_weights.as_slice());
    adam.update(slot + 1, head.bias.as_mut_slice(), g.head_bias.as_slice());
}

/// Token indices of every sentence in the dataset.
pub fn tokenize_dataset(ds: &LabeledDataset, vocab: &Vocabulary) -> Vec<Vec<usize>> {
    ds.texts().iter().map(|t| vocab.encode_text(t)).collect()
}

/// Dev accuracy of head over `[prefix, alpha * cnn]` features.
fn accuracy_on(
    cnn: &TextCnn,
    head: &LinearClassifier,
    sentences: &[Vec<usize>],
    prefix: Option<&Mat>,
    alpha: f64,
    rows: &[usize],
    labels: &[usize],
) -> Result<f64> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let feats = features_for(cnn, sentences, prefix, alpha, rows)?;
    let pred = crate::classifier::predict(head, &EmbeddingSet::new(feats, "joint")?)?;
    Ok(pred.iter().zip(rows).filter(|(p, &i)| **p == labels[i]).count() as f64 / rows.len() as f64)
}

fn features_for(
    cnn: &TextCnn,
    sentences: &[Vec<usize>],
    prefix: Option<&Mat>,
    alpha: f64,
    rows: &[usize],
) -> Result<Mat> {
    let pre = prefix.map_or(0, |p| p.ncols());
    let subset: Vec<&[usize]> = rows.iter().map(|&i| sentences[i].as_slice()).collect();
    let enc = cnn.encode_all(&subset)?;
    let mut m = Mat::zeros(rows.len(), pre + cnn.output_dim());
    for (r, &i) in rows.iter().enumerate() {
        if let Some(p) = prefix {
            for j in 0..pre {
                m[(r, j)] = p[(i, j)];
            }
        }
        for j in 0..enc.ncols() {
            m[(r, pre + j)] = alpha * enc[(r, j)];
        }
    }
    Ok(m)
}

/// Outcome of a training run: the best-on-dev parameters and the dev
/// accuracy after every epoch (index 0 is before any update).
#[derive(Debug, Clone)]
pub struct Trained {
    pub cnn: TextCnn,
    pub head: LinearClassifier,
    pub dev_history: Vec<f64>,
    pub best_epoch: usize,
}

impl Trained {
    pub fn best_dev(&self) -> f64 {
        self.dev_history[self.best_epoch]
    }
}

#[allow(clippy::too_many_arguments)]
fn run_epochs(
    ds: &LabeledDataset,
    sentences: &[Vec<usize>],
    prefix: Option<&Mat>,
    alpha: f64,
    mut cnn: TextCnn,
    mut head: LinearClassifier,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    let split = ds.require_split()?;
    let labels = ds.labels();
    let mut shuffle_rng = rng::child(seed, 1);
    let mut dropout_rng = rng::child(seed, 2);
    let mut adam = Adam::new(cfg.learning_rate, &slot_sizes(&cnn, &head));
    let mut history = vec![accuracy_on(&cnn, &head, sentences, prefix, alpha, &split.dev, labels)?];
    let mut best = (cnn.clone(), head.clone());
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut order = split.train.clone();
    let bs = cfg.batch_size.max(1);
    for epoch in 1..=cfg.epochs {
        rng::shuffle(&mut shuffle_rng, &mut order);
        for chunk in order.chunks(bs) {
            let sents: Vec<&[usize]> = chunk.iter().map(|&i| sentences[i].as_slice()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let pre_rows: Vec<Vec<f64>> = match prefix {
                Some(p) => chunk.iter().map(|&i| p.row(i).iter().copied().collect()).collect(),
                None => Vec::new(),
            };
            let pre_refs: Vec<&[f64]> = pre_rows.iter().map(Vec::as_slice).collect();
            let batch = Batch {
                sentences: &sents,
                labels: &ys,
                prefix: prefix.map(|_| pre_refs.as_slice()),
                alpha,
            };
            let (_, grads) = joint_forward_backward(&cnn, &head, &batch, cfg.head_l2, Some(&mut dropout_rng))?;
            apply(&mut adam, &mut cnn, &mut head, &grads);
        }
        let acc = accuracy_on(&cnn, &head, sentences, prefix, alpha, &split.dev, labels)?;
        history.push(acc);
        if acc > history[best_epoch] {
            best = (cnn.clone(), head.clone());
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (cnn, head) = best;
    Ok(Trained {
        cnn,
        head,
        dev_history: history,
        best_epoch,
    })
}

/// Trains the encoder with its own linear head on the train split, keeping
/// the parameters with the best dev accuracy.
#[allow(clippy::too_many_arguments)]
pub fn train_cnn(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    mode: EmbeddingMode,
    word_vectors: Option<&WordVectors>,
    config: &CnnConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    let cnn = TextCnn::new(config.clone(), vocab, mode, word_vectors, seed)?;
    let sentences = tokenize_dataset(ds, vocab);
    let mut head = LinearClassifier::zeros(ds.num_classes(), cnn.output_dim());
    head.l2_penalty = train.head_l2;
    run_epochs(ds, &sentences, None, 1.0, cnn, head, train, seed)
}

/// Joint fine-tuning of an already trained encoder and a head over
/// `[v1, alpha * cnn(s)]`. `v1` is a constant input. Epoch 0 is the
/// starting point, so the result is never worse on dev than the start.
#[allow(clippy::too_many_arguments)]
pub fn joint_finetune(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    v1: &EmbeddingSet,
    cnn: TextCnn,
    head: LinearClassifier,
    alpha: f64,
    train: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    v1.require_rows(ds.len(), "CAT-open pre-trained view rows")?;
    if !cnn.mode.trains_embeddings() && cnn.banks.is_empty() {
        return Err(Error::invalid("nothing to train"));
    }
    let sentences = tokenize_dataset(ds, vocab);
    run_epochs(ds, &sentences, Some(v1.vectors()), alpha, cnn, head, train, seed)
}

/// CAT-open: train the encoder on the task first, fit a head on the frozen
/// concatenation, then train encoder and head jointly with `v1` held fixed.
#[allow(clippy::too_many_arguments)]
pub fn train_cat_open(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    v1: &EmbeddingSet,
    mode: EmbeddingMode,
    word_vectors: Option<&WordVectors>,
    alpha: f64,
    l2: f64,
    config: &CnnConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<Trained> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(alloc::format!("alpha must be positive, got {alpha}")));
    }
    v1.require_rows(ds.len(), "CAT-open pre-trained view rows")?;
    let pre = train_cnn(ds, vocab, mode, word_vectors, config, train, seed)?;
    let head = cat_head(ds, vocab, v1, &pre.cnn, alpha, l2)?;
    let joint_cfg = TrainConfig {
        head_l2: l2,
        ..train.clone()
    };
    joint_finetune(ds, vocab, v1, pre.cnn, head, alpha, &joint_cfg, seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

/// Logistic-regression head on the frozen concatenation `[v1, alpha * cnn]`.
pub fn cat_head(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    v1: &EmbeddingSet,
    cnn: &TextCnn,
    alpha: f64,
    l2: f64,
) -> Result<LinearClassifier> {
    let split = ds.require_split()?;
    let sentences = tokenize_dataset(ds, vocab);
    let feats = features_for(cnn, &sentences, Some(v1.vectors()), alpha, &split.train)?;
    train_logreg(
        &EmbeddingSet::new(feats, "cat")?,
        &ds.labels_at(&split.train),
        ds.num_classes(),
        l2,
        &OptimizerConfig::default(),
    )
}

/// Accuracy of a jointly trained model on the given rows.
pub fn joint_accuracy(
    ds: &LabeledDataset,
    vocab: &Vocabulary,
    v1: Option<&EmbeddingSet>,
    model: &Trained,
    alpha: f64,
    rows: &[usize],
) -> Result<f64> {
    let sentences = tokenize_dataset(ds, vocab);
    accuracy_on(&model.cnn, &model.head, &sentences, v1.map(|v| v.vectors()), alpha, rows, ds.labels())
}

/// Inference-mode encoder embeddings for every sentence of the dataset.
pub fn encode_dataset(ds: &LabeledDataset, vocab: &Vocabulary, cnn: &TextCnn) -> Result<EmbeddingSet> {
    let sentences = tokenize_dataset(ds, vocab);
    EmbeddingSet::new(cnn.encode_all(&sentences)?, "cnn")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::evaluate;
    use crate::dataset::{make_split, SplitMode};
    use crate::encoder::vocab::build_vocab;
    use rand::Rng as _;

    const FILLER: [&str; 12] = [
        "the", "a", "movie", "plot", "was", "is", "very", "quite", "and", "it", "this", "story",
    ];

    fn xor_corpus(n: usize, seed: u64) -> LabeledDataset {
        corpus(n, seed, |g, b| g ^ b)
    }

    fn keyword_corpus(n: usize, seed: u64) -> LabeledDataset {
        corpus(n, seed, |g, _| g)
    }

    fn corpus(n: usize, seed: u64, rule: fn(bool, bool) -> bool) -> LabeledDataset {
        let mut r = rng::rng(seed);
        let mut texts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let good = i % 4 == 1 || i % 4 == 3;
            let bad = i % 4 >= 2;
            let len = r.random_range(3..8);
            let mut words: Vec<&str> = (0..len).map(|_| FILLER[r.random_range(0..FILLER.len())]).collect();
            if good {
                let p = r.random_range(0..=words.len());
                words.insert(p, "good");
            }
            if bad {
                let p = r.random_range(0..=words.len());
                words.insert(p, "bad");
            }
            texts.push(words.join(" "));
            labels.push(usize::from(rule(good, bad)));
        }
        let ds = LabeledDataset::new(texts, labels).unwrap();
        make_split(&ds, (0.6, 0.2, 0.2), seed, SplitMode::Stratified).unwrap()
    }

    fn small() -> CnnConfig {
        CnnConfig {
            embed_dim: 16,
            filters_per_width: 8,
            widths: vec![3, 4, 5],
            max_len: 32,
            dropout: 0.5,
        }
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 32,
            learning_rate: 1e-2,
            head_l2: 1e-4,
            patience: 3,
        }
    }

    #[test]
    fn learns_keyword_xor() {
        let ds = xor_corpus(2000, 2);
        let vocab = build_vocab(&ds);
        let t = train_cnn(&ds, &vocab, EmbeddingMode::RandomTrainable, None, &small(), &quick(20), 2).unwrap();
        assert!(t.best_dev() >= 0.95, "dev history {:?}", t.dev_history);
        assert!(t.dev_history.len() <= 21);
    }

    #[test]
    fn zero_epochs_returns_initialisation() {
        let ds = xor_corpus(80, 2);
        let vocab = build_vocab(&ds);
        let t = train_cnn(&ds, &vocab, EmbeddingMode::RandomTrainable, None, &small(), &quick(0), 5).unwrap();
        let init = TextCnn::new(small(), &vocab, EmbeddingMode::RandomTrainable, None, 5).unwrap();
        assert_eq!(t.cnn, init);
        assert_eq!(t.dev_history.len(), 1);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let ds = xor_corpus(120, 3);
        let vocab = build_vocab(&ds);
        let a = train_cnn(&ds, &vocab, EmbeddingMode::RandomTrainable, None, &small(), &quick(4), 9).unwrap();
        let b = train_cnn(&ds, &vocab, EmbeddingMode::RandomTrainable, None, &small(), &quick(4), 9).unwrap();
        assert_eq!(a.dev_history, b.dev_history);
        assert_eq!(a.cnn, b.cnn);
    }

    fn word_vectors(vocab: &Vocabulary, dim: usize) -> WordVectors {
        let mut r = rng::rng(8);
        let mut wv = WordVectors::new(dim);
        for t in vocab.tokens().iter().skip(2) {
            wv.insert(t.clone(), (0..dim).map(|_| rng::normal(&mut r) * 0.3).collect()).unwrap();
        }
        wv
    }

    #[test]
    fn mode_contracts_hold_through_training() {
        let ds = xor_corpus(80, 4);
        let vocab = build_vocab(&ds);
        let wv = word_vectors(&vocab, 16);
        let sentences = tokenize_dataset(&ds, &vocab);
        for mode in [EmbeddingMode::PretrainedStatic, EmbeddingMode::PretrainedTrainable, EmbeddingMode::RandomTrainable] {
            let init = TextCnn::new(small(), &vocab, mode, Some(&wv), 1).unwrap();
            let stepped = one_step(&ds, &sentences, init.clone()).unwrap();
            let same = stepped.embeddings.iter().zip(&init.embeddings).all(|(a, b)| a.to_bits() == b.to_bits());
            assert_eq!(same, !mode.trains_embeddings(), "{mode:?}");
            assert!(stepped.embeddings[..16].iter().all(|&x| x == 0.0));
        }
        let t = train_cnn(&ds, &vocab, EmbeddingMode::PretrainedStatic, Some(&wv), &small(), &quick(3), 1).unwrap();
        let init = TextCnn::new(small(), &vocab, EmbeddingMode::PretrainedStatic, Some(&wv), 1).unwrap();
        assert_eq!(t.cnn.embeddings, init.embeddings);
    }

    fn random_head(d: usize) -> LinearClassifier {
        let mut r = rng::rng(2);
        let mut h = LinearClassifier::zeros(2, d);
        h.weights.iter_mut().for_each(|w| *w = rng::normal(&mut r));
        h
    }

    fn one_step(ds: &LabeledDataset, sentences: &[Vec<usize>], mut cnn: TextCnn) -> Result<TextCnn> {
        let mut head = random_head(cnn.output_dim());
        let split = ds.require_split()?;
        let idx = &split.train[..16];
        let sents: Vec<&[usize]> = idx.iter().map(|&i| sentences[i].as_slice()).collect();
        let ys: Vec<usize> = idx.iter().map(|&i| ds.labels()[i]).collect();
        let batch = Batch {
            sentences: &sents,
            labels: &ys,
            prefix: None,
            alpha: 1.0,
        };
        let (_, g) = joint_forward_backward(&cnn, &head, &batch, 0.0, None)?;
        let mut adam = Adam::new(1e-2, &slot_sizes(&cnn, &head));
        apply(&mut adam, &mut cnn, &mut head, &g);
        Ok(cnn)
    }

    fn noise_view(n: usize, dim: usize, labels: Option<&[usize]>, seed: u64) -> EmbeddingSet {
        let mut r = rng::rng(seed);
        let mut m = Mat::zeros(n, dim);
        for i in 0..n {
            for j in 0..dim {
                m[(i, j)] = rng::normal(&mut r);
            }
            if let Some(y) = labels {
                m[(i, 0)] += if y[i] == 1 { 1.0 } else { -1.0 };
            }
        }
        EmbeddingSet::new(m, "v1").unwrap()
    }

    #[test]
    fn cat_open_uses_the_encoder() {
        let ds = keyword_corpus(400, 6);
        let vocab = build_vocab(&ds);
        let split = ds.require_split().unwrap().clone();
        let v1 = noise_view(ds.len(), 8, None, 3);
        let alone = train_logreg(&v1.select(&split.train), &ds.labels_at(&split.train), 2, 1e-2, &OptimizerConfig::default()).unwrap();
        let alone_dev = evaluate(&alone, &v1.select(&split.dev), &ds.labels_at(&split.dev)).unwrap();
        let t = train_cat_open(&ds, &vocab, &v1, EmbeddingMode::RandomTrainable, None, 1.0, 1e-2, &small(), &quick(20), 4).unwrap();
        assert!(t.best_dev() >= alone_dev + 0.10, "{} vs {alone_dev}", t.best_dev());
        let again = train_cat_open(&ds, &vocab, &v1, EmbeddingMode::RandomTrainable, None, 1.0, 1e-2, &small(), &quick(20), 4).unwrap();
        assert_eq!(t.dev_history, again.dev_history);
    }

    #[test]
    fn tiny_alpha_reduces_to_first_view() {
        let ds = xor_corpus(600, 7);
        let vocab = build_vocab(&ds);
        let split = ds.require_split().unwrap().clone();
        let v1 = noise_view(ds.len(), 4, Some(ds.labels()), 5);
        let alone = train_logreg(&v1.select(&split.train), &ds.labels_at(&split.train), 2, 1e-2, &OptimizerConfig::default()).unwrap();
        let alone_dev = evaluate(&alone, &v1.select(&split.dev), &ds.labels_at(&split.dev)).unwrap();
        let t = train_cat_open(&ds, &vocab, &v1, EmbeddingMode::RandomTrainable, None, 1e-9, 1e-2, &small(), &quick(5), 4).unwrap();
        let dev = joint_accuracy(&ds, &vocab, Some(&v1), &t, 1e-9, &split.dev).unwrap();
        assert_eq!(dev, t.best_dev());
        assert!((dev - alone_dev).abs() <= 0.02 + 1e-12, "{dev} vs {alone_dev}");
    }

    #[test]
    fn rejects_bad_alpha_and_rows() {
        let ds = xor_corpus(40, 8);
        let vocab = build_vocab(&ds);
        let v1 = noise_view(ds.len(), 2, None, 1);
        assert!(train_cat_open(&ds, &vocab, &v1, EmbeddingMode::RandomTrainable, None, 0.0, 1.0, &small(), &quick(1), 0).is_err());
        let short = noise_view(ds.len() - 1, 2, None, 1);
        assert!(train_cat_open(&ds, &vocab, &short, EmbeddingMode::RandomTrainable, None, 1.0, 1.0, &small(), &quick(1), 0).is_err());
    }
}
