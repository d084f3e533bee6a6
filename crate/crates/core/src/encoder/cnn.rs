//! Text-CNN sentence encoder: embedding lookup, one valid 1-D convolution
//! bank per filter width, ReLU, max-over-time pooling and dropout, with the
//! backward pass written out by hand.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::Rng as _;

use crate::classifier::LinearClassifier;
use crate::embedding::Mat;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

use super::vocab::{Vocabulary, PAD};
use super::wordvec::WordVectors;

pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CnnConfig {
    pub embed_dim: usize,
    pub filters_per_width: usize,
    pub widths: Vec<usize>,
    pub max_len: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            embed_dim: 300,
            filters_per_width: 128,
            widths: vec![3, 4, 5],
            max_len: DEFAULT_MAX_LEN,
            dropout: 0.5,
        }
    }
}

impl CnnConfig {
    pub fn output_dim(&self) -> usize {
        self.filters_per_width * self.widths.len()
    }

    pub fn max_width(&self) -> usize {
        self.widths.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.filters_per_width == 0 || self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid("CNN dimensions must be positive"));
        }
        if self.max_len < self.max_width() {
            return Err(Error::invalid("max_len shorter than the widest filter"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 1)"));
        }
        Ok(())
    }
}

/// How word embeddings are initialised and whether training touches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EmbeddingMode {
    /// Random initialisation, trained (CNN-R).
    RandomTrainable,
    /// Pre-trained vectors, frozen (CNN-S).
    PretrainedStatic,
    /// Pre-trained vectors, trained (CNN-NS).
    PretrainedTrainable,
}

impl EmbeddingMode {
    pub fn trains_embeddings(self) -> bool {
        !matches!(self, EmbeddingMode::PretrainedStatic)
    }

    pub fn needs_word_vectors(self) -> bool {
        !matches!(self, EmbeddingMode::RandomTrainable)
    }

    pub fn code(self) -> u8 {
        match self {
            EmbeddingMode::RandomTrainable => 0,
            EmbeddingMode::PretrainedStatic => 1,
            EmbeddingMode::PretrainedTrainable => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(EmbeddingMode::RandomTrainable),
            1 => Some(EmbeddingMode::PretrainedStatic),
            2 => Some(EmbeddingMode::PretrainedTrainable),
            _ => None,
        }
    }
}

/// Filters of one width: `weights` is `filters x (width * embed_dim)`,
/// row-major, each row laid out window-position-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvBank {
    pub width: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TextCnn {
    pub config: CnnConfig,
    pub mode: EmbeddingMode,
    pub vocab_size: usize,
    /// `vocab_size x embed_dim`, row-major. Row `PAD` is zero and never trained.
    pub embeddings: Vec<f64>,
    pub banks: Vec<ConvBank>,
}

/// Cached forward pass of one sentence.
#[derive(Debug, Clone)]
pub struct Forward {
    pub tokens: Vec<usize>,
    /// Pooled features after dropout.
    pub features: Vec<f64>,
    /// Earliest arg-max time step per feature.
    pub argmax: Vec<usize>,
    /// Whether the pooled pre-activation was positive (ReLU open).
    pub active: Vec<bool>,
    /// Dropout multiplier per feature (0 or 1/(1-p); 1 at inference).
    pub mask: Vec<f64>,
}

/// Gradients of the encoder parameters; `embeddings` is empty in static mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnGrads {
    pub embeddings: Vec<f64>,
    pub banks: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CnnGrads {
    pub fn zeros_like(cnn: &TextCnn) -> Self {
        CnnGrads {
            embeddings: if cnn.mode.trains_embeddings() {
                vec![0.0; cnn.embeddings.len()]
            } else {
                Vec::new()
            },
            banks: cnn
                .banks
                .iter()
                .map(|b| (vec![0.0; b.weights.len()], vec![0.0; b.bias.len()]))
                .collect(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl TextCnn {
    /// Fresh encoder. Random embeddings are U(-0.25, 0.25); pre-trained modes
    /// copy `word_vectors` where available and draw the rest from N(0, 0.1^2).
    /// Filters are U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
    pub fn new(
        config: CnnConfig,
        vocab: &Vocabulary,
        mode: EmbeddingMode,
        word_vectors: Option<&WordVectors>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let e = config.embed_dim;
        let v = vocab.len();
        let mut r = rng::child(seed, 0x636e6e);
        let mut embeddings = vec![0.0; v * e];
        match (mode.needs_word_vectors(), word_vectors) {
            (true, None) => {
                return Err(Error::invalid("pre-trained embedding mode needs word vectors"));
            }
            (true, Some(wv)) if wv.dim() != e => {
                return Err(Error::DimensionMismatch {
                    expected: e,
                    actual: wv.dim(),
                    context: "word vector dimension",
                });
            }
            _ => {}
        }
        for idx in 1..v {
            let row = &mut embeddings[idx * e..(idx + 1) * e];
            let pre = if mode.needs_word_vectors() {
                word_vectors.and_then(|wv| vocab.token(idx).and_then(|t| wv.get(t)))
            } else {
                None
            };
            match pre {
                Some(vec) => row.copy_from_slice(vec),
                None if mode.needs_word_vectors() => row.iter_mut().for_each(|x| *x = 0.1 * rng::normal(&mut r)),
                None => row.iter_mut().for_each(|x| *x = r.random_range(-0.25..0.25)),
            }
        }
        let banks = config
            .widths
            .iter()
            .map(|&w| {
                let fan_in = (w * e) as f64;
                let bound = 1.0 / libm::sqrt(fan_in);
                ConvBank {
                    width: w,
                    weights: (0..config.filters_per_width * w * e)
                        .map(|_| r.random_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; config.filters_per_width],
                }
            })
            .collect();
        Ok(TextCnn {
            config,
            mode,
            vocab_size: v,
            embeddings,
            banks,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    /// Checks that every parameter tensor matches the configuration, e.g.
    /// after deserialising.
    pub fn check_shapes(&self) -> Result<()> {
        self.config.validate()?;
        let e = self.config.embed_dim;
        let f = self.config.filters_per_width;
        if self.embeddings.len() != self.vocab_size * e {
            return Err(Error::DimensionMismatch {
                expected: self.vocab_size * e,
                actual: self.embeddings.len(),
                context: "embedding table",
            });
        }
        if self.embeddings[PAD * e..(PAD + 1) * e].iter().any(|&x| x != 0.0) {
            return Err(Error::invalid("padding embedding must be zero"));
        }
        if self.banks.len() != self.config.widths.len() {
            return Err(Error::DimensionMismatch {
                expected: self.config.widths.len(),
                actual: self.banks.len(),
                context: "filter banks",
            });
        }
        for (bank, &w) in self.banks.iter().zip(&self.config.widths) {
            if bank.width != w || bank.weights.len() != f * w * e || bank.bias.len() != f {
                return Err(Error::invalid(alloc::format!("filter bank of width {w} has the wrong shape")));
            }
        }
        if self.embeddings.iter().chain(self.banks.iter().flat_map(|b| b.weights.iter().chain(&b.bias))).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite CNN parameter"));
        }
        Ok(())
    }

    fn embedding(&self, idx: usize) -> &[f64] {
        let e = self.config.embed_dim;
        &self.embeddings[idx * e..(idx + 1) * e]
    }

    /// Truncates to `max_len` and pads with `PAD` up to the widest filter.
    pub fn prepare(&self, tokens: &[usize]) -> Vec<usize> {
        let mut t: Vec<usize> = tokens.iter().copied().take(self.config.max_len).collect();
        while t.len() < self.config.max_width() {
            t.push(PAD);
        }
        t
    }

    /// Forward pass; dropout is applied only when `dropout_rng` is given.
    pub fn forward(&self, tokens: &[usize], dropout_rng: Option<&mut Rng>) -> Result<Forward> {
        let mut f = self.forward_block(&[tokens])?.pop().expect("one sentence in, one out");
        if let Some(r) = dropout_rng {
            self.apply_dropout(&mut f, r);
        }
        Ok(f)
    }

    fn apply_dropout(&self, f: &mut Forward, r: &mut Rng) {
        let p = self.config.dropout;
        if p > 0.0 {
            let keep = 1.0 / (1.0 - p);
            for (m, x) in f.mask.iter_mut().zip(f.features.iter_mut()) {
                *m = if r.random::<f64>() < p { 0.0 } else { keep };
                *x *= *m;
            }
        }
    }

    /// Filter kernels regrouped as an `embed_dim x (sum of widths * filters)`
    /// panel; column `(bank, k, f)` is row `k` of filter `f`.
    fn packed_kernels(&self) -> (Vec<f64>, Vec<usize>) {
        let e = self.config.embed_dim;
        let nf = self.config.filters_per_width;
        let cols: usize = self.banks.iter().map(|b| b.width * nf).sum();
        let mut panel = vec![0.0; e * cols];
        let mut offsets = Vec::with_capacity(self.banks.len());
        let mut c0 = 0;
        for bank in &self.banks {
            offsets.push(c0);
            let span = bank.width * e;
            for k in 0..bank.width {
                for f in 0..nf {
                    let col = c0 + k * nf + f;
                    let src = &bank.weights[f * span + k * e..f * span + (k + 1) * e];
                    for (j, w) in src.iter().enumerate() {
                        panel[j * cols + col] = *w;
                    }
                }
            }
            c0 += bank.width * nf;
        }
        (panel, offsets)
    }

    /// Inference-mode forward passes of a block of sentences with one
    /// matrix product over all their time steps.
    fn forward_block(&self, sentences: &[&[usize]]) -> Result<Vec<Forward>> {
        for s in sentences {
            if let Some(&bad) = s.iter().find(|&&t| t >= self.vocab_size) {
                return Err(Error::invalid(alloc::format!(
                    "token index {bad} out of range for vocabulary of {}",
                    self.vocab_size
                )));
            }
        }
        let prepared: Vec<Vec<usize>> = sentences.iter().map(|s| self.prepare(s)).collect();
        let e = self.config.embed_dim;
        let nf = self.config.filters_per_width;
        let total: usize = prepared.iter().map(Vec::len).sum();
        let mut seq = vec![0.0; total * e];
        let mut row = 0;
        for toks in &prepared {
            for &tok in toks {
                seq[row * e..(row + 1) * e].copy_from_slice(self.embedding(tok));
                row += 1;
            }
        }
        let (panel, offsets) = self.packed_kernels();
        let cols = panel.len() / e;
        let mut y = vec![0.0; total * cols];
        // SAFETY: seq is total x e, panel is e x cols, y is total x cols, all row-major.
        unsafe {
            matrixmultiply::dgemm(
                total,
                e,
                cols,
                1.0,
                seq.as_ptr(),
                e as isize,
                1,
                panel.as_ptr(),
                cols as isize,
                1,
                0.0,
                y.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
        let out_dim = self.output_dim();
        let mut out = Vec::with_capacity(prepared.len());
        let mut start = 0;
        for tokens in prepared {
            let len = tokens.len();
            let mut features = vec![0.0; out_dim];
            let mut argmax = vec![0; out_dim];
            let mut active = vec![false; out_dim];
            let mut best = vec![f64::NEG_INFINITY; nf];
            let mut best_t = vec![0usize; nf];
            let mut zrow = vec![0.0; nf];
            for (bi, bank) in self.banks.iter().enumerate() {
                let steps = len + 1 - bank.width;
                let c0 = offsets[bi];
                best.iter_mut().for_each(|b| *b = f64::NEG_INFINITY);
                for t in 0..steps {
                    zrow.iter_mut().for_each(|z| *z = 0.0);
                    for k in 0..bank.width {
                        let base = (start + t + k) * cols + c0 + k * nf;
                        for (z, v) in zrow.iter_mut().zip(&y[base..base + nf]) {
                            *z += v;
                        }
                    }
                    for f in 0..nf {
                        if zrow[f] > best[f] {
                            best[f] = zrow[f];
                            best_t[f] = t;
                        }
                    }
                }
                for f in 0..nf {
                    let zf = best[f] + bank.bias[f];
                    let o = bi * nf + f;
                    argmax[o] = best_t[f];
                    active[o] = zf > 0.0;
                    features[o] = if zf > 0.0 { zf } else { 0.0 };
                }
            }
            start += len;
            out.push(Forward {
                tokens,
                features,
                argmax,
                active,
                mask: vec![1.0; out_dim],
            });
        }
        Ok(out)
    }

    /// Sentence embedding of dimension `output_dim()`.
    pub fn encode(&self, tokens: &[usize], train_mode: bool, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.forward(tokens, if train_mode { Some(rng) } else { None })?.features)
    }

    /// Forward passes of many sentences; dropout masks are drawn in order.
    pub fn forward_many<S: AsRef<[usize]> + Sync>(
        &self,
        sentences: &[S],
        dropout_rng: Option<&mut Rng>,
    ) -> Result<Vec<Forward>> {
        const BLOCK: usize = 64;
        let blocks: Vec<Vec<&[usize]>> = sentences
            .chunks(BLOCK)
            .map(|c| c.iter().map(|s| s.as_ref()).collect())
            .collect();
        let mut out = Vec::with_capacity(sentences.len());
        for block in crate::par::map(&blocks, |b| self.forward_block(b)) {
            out.extend(block?);
        }
        if let Some(r) = dropout_rng {
            for f in &mut out {
                self.apply_dropout(f, r);
            }
        }
        Ok(out)
    }

    /// Inference-mode embeddings of many sentences as a matrix.
    pub fn encode_all<S: AsRef<[usize]> + Sync>(&self, sentences: &[S]) -> Result<Mat> {
        let fwd = self.forward_many(sentences, None)?;
        let mut m = Mat::zeros(sentences.len(), self.output_dim());
        for (i, f) in fwd.iter().enumerate() {
            for (j, v) in f.features.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// Accumulates parameter gradients given `d loss / d features`.
    pub fn backward(&self, fwd: &Forward, dfeat: &[f64], grads: &mut CnnGrads) {
        let e = self.config.embed_dim;
        let nf = self.config.filters_per_width;
        let train_emb = self.mode.trains_embeddings();
        for (bi, bank) in self.banks.iter().enumerate() {
            let span = bank.width * e;
            let (gw, gb) = &mut grads.banks[bi];
            for f in 0..nf {
                let o = bi * nf + f;
                if !fwd.active[o] || fwd.mask[o] == 0.0 {
                    continue;
                }
                let dz = dfeat[o] * fwd.mask[o];
                if dz == 0.0 {
                    continue;
                }
                let t0 = fwd.argmax[o];
                gb[f] += dz;
                let gk = &mut gw[f * span..(f + 1) * span];
                for k in 0..bank.width {
                    let tok = fwd.tokens[t0 + k];
                    axpy(dz, self.embedding(tok), &mut gk[k * e..(k + 1) * e]);
                }
                if train_emb {
                    let kernel = &bank.weights[f * span..(f + 1) * span];
                    for k in 0..bank.width {
                        let tok = fwd.tokens[t0 + k];
                        if tok != PAD {
                            axpy(dz, &kernel[k * e..(k + 1) * e], &mut grads.embeddings[tok * e..(tok + 1) * e]);
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of the joint loss: encoder plus linear head.
#[derive(Debug, Clone)]
pub struct JointGrads {
    pub cnn: CnnGrads,
    pub head_weights: Mat,
    pub head_bias: DVector<f64>,
}

/// One labelled mini-batch for joint training. The head sees
/// `[prefix_i, alpha * cnn(sentence_i)]`; `prefix` rows are constant inputs.
pub struct Batch<'a> {
    pub sentences: &'a [&'a [usize]],
    pub labels: &'a [usize],
    pub prefix: Option<&'a [&'a [f64]]>,
    pub alpha: f64,
}

/// Mean cross-entropy plus `(l2 / 2) |W_head|_F^2` and all gradients.
/// Max-pool gradients route to the earliest arg-max time step.
pub fn joint_forward_backward(
    cnn: &TextCnn,
    head: &LinearClassifier,
    batch: &Batch<'_>,
    l2: f64,
    mut dropout_rng: Option<&mut Rng>,
) -> Result<(f64, JointGrads)> {
    let n = batch.sentences.len();
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if batch.labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: batch.labels.len(),
            context: "batch labels",
        });
    }
    let pre_dim = batch.prefix.map_or(0, |p| p.first().map_or(0, |r| r.len()));
    let feat_dim = pre_dim + cnn.output_dim();
    if head.dim() != feat_dim {
        return Err(Error::DimensionMismatch {
            expected: feat_dim,
            actual: head.dim(),
            context: "head input dim",
        });
    }
    let c = head.num_classes();
    let mut grads = JointGrads {
        cnn: CnnGrads::zeros_like(cnn),
        head_weights: &head.weights * l2,
        head_bias: DVector::zeros(c),
    };
    let mut loss = 0.5 * l2 * head.weights.norm_squared();
    let inv_n = 1.0 / n as f64;
    let rows: Vec<Vec<f64>> = (0..c).map(|k| head.weights.row(k).iter().copied().collect()).collect();
    let mut x = vec![0.0; feat_dim];
    let fwds = cnn.forward_many(batch.sentences, dropout_rng.as_deref_mut())?;
    for (i, fwd) in fwds.iter().enumerate() {
        if let Some(p) = batch.prefix {
            x[..pre_dim].copy_from_slice(p[i]);
        }
        for (dst, src) in x[pre_dim..].iter_mut().zip(&fwd.features) {
            *dst = batch.alpha * src;
        }
        let mut z: Vec<f64> = (0..c).map(|k| dot(&rows[k], &x) + head.bias[k]).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = z.iter().map(|v| libm::exp(v - m)).sum();
        let lse = m + libm::log(s);
        let y = batch.labels[i];
        if y >= c {
            return Err(Error::invalid(alloc::format!("label {y} out of range {c}")));
        }
        loss += (lse - z[y]) * inv_n;
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = libm::exp(*zk - lse) - if k == y { 1.0 } else { 0.0 };
        }
        // d loss / d x = W^T dz
        let mut dx = vec![0.0; feat_dim];
        for k in 0..c {
            let g = z[k] * inv_n;
            grads.head_bias[k] += g;
            for j in 0..feat_dim {
                grads.head_weights[(k, j)] += g * x[j];
                dx[j] += g * head.weights[(k, j)];
            }
        }
        let dfeat: Vec<f64> = dx[pre_dim..].iter().map(|v| v * batch.alpha).collect();
        cnn.backward(fwd, &dfeat, &mut grads.cnn);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical("non-finite loss".into()));
    }
    Ok((loss, grads))
}

/// Loss and gradients for the encoder with its own head (no prefix view).
pub fn cnn_forward_backward(
    cnn: &TextCnn,
    sentences: &[&[usize]],
    labels: &[usize],
    head: &LinearClassifier,
    dropout_rng: Option<&mut Rng>,
) -> Result<(f64, JointGrads)> {
    let batch = Batch {
        sentences,
        labels,
        prefix: None,
        alpha: 1.0,
    };
    joint_forward_backward(cnn, head, &batch, head.l2_penalty, dropout_rng)
}
