//! End-to-end experiments: split, build the second view, grid-search the
//! combiner and classifier on dev, report test accuracy; repeated over seeds.

use alloc::string::String;
use alloc::vec::Vec;

use crate::classifier::{evaluate, train_logreg, GridEntry, GridSearchReport, HyperParams};
use crate::combiner::{cat_combine, cca_combine, fit_cca, fit_kcca, kcca_combine, CcaOptions, KccaOptions};
use crate::config::RunConfig;
use crate::dataset::{make_split, subsample_train, LabeledDataset};
use crate::embedding::EmbeddingSet;
use crate::encoder::{
    bow_encode, build_vocab, encode_dataset, joint_accuracy, joint_finetune, train_cnn, EmbeddingMode, TrainConfig,
    Vocabulary, WordVectors,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    CatLock,
    CatOpen,
    CcaLock,
    KccaLock,
    View1Only,
    View2Only,
    Bow,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::CatLock,
        Method::CatOpen,
        Method::CcaLock,
        Method::KccaLock,
        Method::View1Only,
        Method::View2Only,
        Method::Bow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CatLock => "cat_lock",
            Method::CatOpen => "cat_open",
            Method::CcaLock => "cca_lock",
            Method::KccaLock => "kcca_lock",
            Method::View1Only => "view1_only",
            Method::View2Only => "view2_only",
            Method::Bow => "bow",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown method {s:?}")))
    }

    fn needs_view1(self) -> bool {
        !matches!(self, Method::View2Only | Method::Bow)
    }

    fn needs_view2(self) -> bool {
        !matches!(self, Method::View1Only | Method::Bow)
    }
}

/// Source of the second (domain) view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EncoderMode {
    CnnR,
    CnnS,
    CnnNs,
    Bow,
    None,
}

impl EncoderMode {
    pub const ALL: [EncoderMode; 5] = [
        EncoderMode::CnnR,
        EncoderMode::CnnS,
        EncoderMode::CnnNs,
        EncoderMode::Bow,
        EncoderMode::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EncoderMode::CnnR => "cnn_r",
            EncoderMode::CnnS => "cnn_s",
            EncoderMode::CnnNs => "cnn_ns",
            EncoderMode::Bow => "bow",
            EncoderMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown encoder mode {s:?}")))
    }

    pub fn cnn_mode(self) -> Option<EmbeddingMode> {
        match self {
            EncoderMode::CnnR => Some(EmbeddingMode::RandomTrainable),
            EncoderMode::CnnS => Some(EmbeddingMode::PretrainedStatic),
            EncoderMode::CnnNs => Some(EmbeddingMode::PretrainedTrainable),
            EncoderMode::Bow | EncoderMode::None => None,
        }
    }
}

/// Inputs shared by every repeat. A dataset that already carries a split
/// keeps it in every repeat; otherwise each repeat draws its own.
#[derive(Debug, Clone, Copy)]
pub struct PipelineData<'a> {
    pub dataset: &'a LabeledDataset,
    /// Frozen pre-trained view, row-aligned with `dataset`.
    pub view1: Option<&'a EmbeddingSet>,
    pub word_vectors: Option<&'a WordVectors>,
}

/// Checks that the methods can run with this encoder and data.
pub fn validate_methods(methods: &[Method], encoder: EncoderMode, data: &PipelineData<'_>, cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    for &m in methods {
        if m.needs_view1() {
            let v1 = data
                .view1
                .ok_or_else(|| Error::invalid(alloc::format!("{} needs pre-trained embeddings", m.name())))?;
            v1.require_rows(data.dataset.len(), "pre-trained embedding rows vs dataset")?;
        }
        if m.needs_view2() && encoder == EncoderMode::None {
            return Err(Error::invalid(alloc::format!("{} needs an encoder mode other than none", m.name())));
        }
        if m == Method::CatOpen && encoder.cnn_mode().is_none() {
            return Err(Error::invalid("cat_open needs a trainable encoder (cnn_r, cnn_s or cnn_ns)"));
        }
    }
    if let Some(mode) = encoder.cnn_mode() {
        if mode.needs_word_vectors() && data.word_vectors.is_none() && methods.iter().any(|m| m.needs_view2()) {
            return Err(Error::invalid(alloc::format!("encoder {} needs word vectors", encoder.name())));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RepeatResult {
    pub method: Method,
    pub repeat: usize,
    pub seed: u64,
    pub train_size: usize,
    pub grid: GridSearchReport,
    pub dev_acc: f64,
    pub test_acc: f64,
    /// Dev accuracy of the encoder's own head, when one was trained.
    pub encoder_dev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineResult {
    pub method: Method,
    pub encoder: EncoderMode,
    pub repeats: Vec<RepeatResult>,
    pub mean_dev: f64,
    pub mean_test: f64,
    /// Sample standard deviation (n - 1) across repeats; 0 for one repeat.
    pub std_test: f64,
}

impl PipelineResult {
    pub fn from_repeats(method: Method, encoder: EncoderMode, repeats: Vec<RepeatResult>) -> Self {
        let dev: Vec<f64> = repeats.iter().map(|r| r.dev_acc).collect();
        let test: Vec<f64> = repeats.iter().map(|r| r.test_acc).collect();
        let (mean_test, std_test) = mean_std(&test);
        PipelineResult {
            method,
            encoder,
            mean_dev: mean_std(&dev).0,
            mean_test,
            std_test,
            repeats,
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

struct Rows<'a> {
    ds: &'a LabeledDataset,
    train: &'a [usize],
    dev: &'a [usize],
    test: &'a [usize],
}

impl Rows<'_> {
    /// Logistic regression on the train rows of `x`; dev and test accuracy.
    fn fit(&self, x: &EmbeddingSet, l2: f64, cfg: &RunConfig) -> Result<(f64, f64)> {
        let ds = self.ds;
        let clf = train_logreg(&x.select(self.train), &ds.labels_at(self.train), ds.num_classes(), l2, &cfg.logreg)?;
        let acc = |rows: &[usize]| -> Result<f64> {
            if rows.is_empty() {
                Ok(0.0)
            } else {
                evaluate(&clf, &x.select(rows), &ds.labels_at(rows))
            }
        };
        Ok((acc(self.dev)?, acc(self.test)?))
    }
}

/// Grid points with the combiner parameters outermost and `l2` innermost.
fn points(outer: &[HyperParams], l2_grid: &[f64]) -> Vec<HyperParams> {
    outer
        .iter()
        .flat_map(|p| l2_grid.iter().map(move |&l2| HyperParams { l2, ..*p }))
        .collect()
}

/// Grid search where `features` builds the combined view for the non-`l2`
/// part of a point; consecutive points sharing it reuse the features.
fn search<F>(rows: &Rows<'_>, pts: &[HyperParams], cfg: &RunConfig, mut features: F) -> Result<GridSearchReport>
where
    F: FnMut(&HyperParams) -> Result<EmbeddingSet>,
{
    let mut cache: Option<(HyperParams, EmbeddingSet)> = None;
    crate::classifier::grid_search_with(pts, |p| {
        let key = HyperParams { l2: 0.0, ..*p };
        let hit = matches!(&cache, Some((k, _)) if *k == key);
        if !hit {
            cache = Some((key, features(p)?));
        }
        let x = &cache.as_ref().expect("cache filled above").1;
        rows.fit(x, p.l2, cfg)
    })
}

/// Shared per-repeat state: split dataset, vocabulary and the domain view.
struct Repeat {
    ds: LabeledDataset,
    vocab: Option<Vocabulary>,
    view1: Option<EmbeddingSet>,
    view2: Option<EmbeddingSet>,
    encoder: Option<crate::encoder::Trained>,
    seed: u64,
}

fn prepare(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    seed: u64,
    train_size: Option<usize>,
) -> Result<Repeat> {
    let mut ds = match data.dataset.split() {
        Some(_) => data.dataset.clone(),
        None => make_split(data.dataset, cfg.split_fractions, seed, cfg.split_mode)?,
    };
    if let Some(m) = train_size {
        if m != ds.require_split()?.train.len() {
            ds = subsample_train(&ds, m, seed)?;
        }
    }
    let need2 = methods.iter().any(|m| m.needs_view2());
    let need_vocab = need2 || methods.contains(&Method::Bow);
    let vocab = need_vocab.then(|| build_vocab(&ds));
    let mut view2 = None;
    let mut trained = None;
    if need2 {
        let vocab = vocab.as_ref().expect("vocabulary built when a second view is needed");
        match encoder.cnn_mode() {
            Some(mode) => {
                let t = train_cnn(&ds, vocab, mode, data.word_vectors, &cfg.cnn, &cfg.encoder, seed)?;
                view2 = Some(encode_dataset(&ds, vocab, &t.cnn)?);
                trained = Some(t);
            }
            None if encoder == EncoderMode::Bow => view2 = Some(bow_encode(&ds, vocab)?),
            None => return Err(Error::invalid("second view requested with encoder none")),
        }
    }
    Ok(Repeat {
        ds,
        vocab,
        view1: data.view1.cloned(),
        view2,
        encoder: trained,
        seed,
    })
}

fn run_method(method: Method, rep: &Repeat, cfg: &RunConfig, cat_lock: Option<&GridSearchReport>) -> Result<(GridSearchReport, f64, f64)> {
    let split = rep.ds.require_split()?;
    let rows = Rows {
        ds: &rep.ds,
        train: &split.train,
        dev: &split.dev,
        test: &split.test,
    };
    let v1 = || rep.view1.as_ref().ok_or_else(|| Error::invalid("missing pre-trained view"));
    let v2 = || rep.view2.as_ref().ok_or_else(|| Error::invalid("missing encoder view"));
    let plain = points(&[HyperParams::default()], &cfg.l2_grid);
    let grid = match method {
        Method::View1Only => search(&rows, &plain, cfg, |_| Ok(v1()?.clone()))?,
        Method::View2Only => search(&rows, &plain, cfg, |_| Ok(v2()?.clone()))?,
        Method::Bow => {
            let vocab = rep.vocab.as_ref().ok_or_else(|| Error::invalid("missing vocabulary"))?;
            let bow = bow_encode(&rep.ds, vocab)?;
            search(&rows, &plain, cfg, |_| Ok(bow.clone()))?
        }
        Method::CatLock => {
            let outer: Vec<HyperParams> = cfg
                .alpha_grid
                .iter()
                .map(|&a| HyperParams { alpha: Some(a), ..Default::default() })
                .collect();
            search(&rows, &points(&outer, &cfg.l2_grid), cfg, |p| cat_combine(v1()?, v2()?, p.alpha.unwrap_or(1.0)))?
        }
        Method::CcaLock => {
            let outer: Vec<HyperParams> = cfg
                .cca_reg_grid
                .iter()
                .map(|&r| HyperParams { reg: Some(r), ..Default::default() })
                .collect();
            let (a, b) = (v1()?, v2()?);
            let (ta, tb) = (a.select(&split.train), b.select(&split.train));
            search(&rows, &points(&outer, &cfg.l2_grid), cfg, |p| {
                let c = fit_cca(&ta, &tb, CcaOptions::new(p.reg.unwrap_or(1e-5)))?;
                cca_combine(&c, a, b)
            })?
        }
        Method::KccaLock => {
            if split.train.len() > cfg.kernel_cap {
                return Err(Error::KernelCap {
                    n: split.train.len(),
                    cap: cfg.kernel_cap,
                });
            }
            let mut outer = Vec::new();
            for &s in &cfg.kcca_sigma_grid {
                for &r in &cfg.kcca_reg_grid {
                    outer.push(HyperParams {
                        sigma: Some(s),
                        reg: Some(r),
                        ..Default::default()
                    });
                }
            }
            let (a, b) = (v1()?, v2()?);
            let (ta, tb) = (a.select(&split.train), b.select(&split.train));
            search(&rows, &points(&outer, &cfg.l2_grid), cfg, |p| {
                let opts = KccaOptions {
                    kernel_cap: cfg.kernel_cap,
                    ..KccaOptions::new(p.sigma.unwrap_or(1.0), p.reg.unwrap_or(1e-3))
                };
                let c = fit_kcca(&ta, &tb, opts)?;
                kcca_combine(&c, a, b)
            })?
        }
        Method::CatOpen => {
            let lock = match cat_lock {
                Some(g) => g.clone(),
                None => run_method(Method::CatLock, rep, cfg, None)?.0,
            };
            let best = lock.best_entry().params;
            let alpha = best.alpha.unwrap_or(1.0);
            let vocab = rep.vocab.as_ref().ok_or_else(|| Error::invalid("missing vocabulary"))?;
            let enc = rep.encoder.as_ref().ok_or_else(|| Error::invalid("cat_open needs a trained encoder"))?;
            let x = cat_combine(v1()?, v2()?, alpha)?;
            let head = train_logreg(&x.select(&split.train), &rep.ds.labels_at(&split.train), rep.ds.num_classes(), best.l2, &cfg.logreg)?;
            let tune = TrainConfig {
                head_l2: best.l2,
                ..cfg.encoder.clone()
            };
            let seed = rep.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let model = joint_finetune(&rep.ds, vocab, v1()?, enc.cnn.clone(), head, alpha, &tune, seed)?;
            let test = joint_accuracy(&rep.ds, vocab, Some(v1()?), &model, alpha, &split.test)?;
            let entry = GridEntry {
                params: best,
                dev_acc: model.best_dev(),
                test_acc: test,
            };
            let mut entries = lock.entries;
            entries.push(entry);
            let n = entries.len();
            // the fine-tuned model is the selected one
            return Ok((GridSearchReport { entries, best: n - 1 }, model.best_dev(), test));
        }
    };
    let best = grid.best_entry();
    let (dev, test) = (best.dev_acc, best.test_acc);
    Ok((grid, dev, test))
}

/// One repeat of several methods sharing the split and the trained encoder.
pub fn run_repeat(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    repeat: usize,
    train_size: Option<usize>,
) -> Result<Vec<RepeatResult>> {
    let seed = cfg.repeat_seed(repeat);
    let rep = prepare(methods, encoder, data, cfg, seed, train_size)?;
    let train_n = rep.ds.require_split()?.train.len();
    let mut lock: Option<GridSearchReport> = None;
    let mut order: Vec<Method> = methods.to_vec();
    order.sort();
    order.dedup();
    let mut out = Vec::new();
    for m in order {
        let (grid, dev_acc, test_acc) = run_method(m, &rep, cfg, lock.as_ref())
            .map_err(|e| e.context(alloc::format!("{} repeat {repeat}", m.name())))?;
        if m == Method::CatLock {
            lock = Some(grid.clone());
        }
        out.push(RepeatResult {
            method: m,
            repeat,
            seed,
            train_size: train_n,
            grid,
            dev_acc,
            test_acc,
            encoder_dev: rep.encoder.as_ref().map(|t| t.best_dev()),
        });
    }
    Ok(out)
}

/// All repeats of several methods; results ordered as `Method` sorts.
pub fn run_methods(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    train_size: Option<usize>,
) -> Result<Vec<PipelineResult>> {
    validate_methods(methods, encoder, &data, cfg)?;
    let mut per: Vec<Vec<RepeatResult>> = Vec::new();
    for i in 0..cfg.repeats {
        per.push(run_repeat(methods, encoder, data, cfg, i, train_size)?);
    }
    Ok(collect_results(encoder, per))
}

/// Groups per-repeat outputs (one vector per repeat) by method.
pub fn collect_results(encoder: EncoderMode, per_repeat: Vec<Vec<RepeatResult>>) -> Vec<PipelineResult> {
    let mut by: alloc::collections::BTreeMap<Method, Vec<RepeatResult>> = alloc::collections::BTreeMap::new();
    for rs in per_repeat {
        for r in rs {
            by.entry(r.method).or_default().push(r);
        }
    }
    by.into_iter()
        .map(|(m, mut rs)| {
            rs.sort_by_key(|r| r.repeat);
            PipelineResult::from_repeats(m, encoder, rs)
        })
        .collect()
}

pub fn run_pipeline(method: Method, encoder: EncoderMode, data: PipelineData<'_>, cfg: &RunConfig) -> Result<PipelineResult> {
    Ok(run_methods(&[method], encoder, data, cfg, None)?.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub size: usize,
    pub results: Vec<PipelineResult>,
}

/// One multi-method run per training-set size, sub-sampling the train split.
pub fn run_size_sweep(
    methods: &[Method],
    encoder: EncoderMode,
    data: PipelineData<'_>,
    cfg: &RunConfig,
    sizes: &[usize],
) -> Result<Vec<SweepPoint>> {
    if sizes.is_empty() {
        return Err(Error::invalid("no sizes given"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sizes must be strictly ascending"));
    }
    sizes
        .iter()
        .map(|&size| {
            Ok(SweepPoint {
                size,
                results: run_methods(methods, encoder, data, cfg, Some(size))
                    .map_err(|e| e.context(alloc::format!("size {size}")))?,
            })
        })
        .collect()
}

/// Human-readable one-line summary.
pub fn describe(r: &PipelineResult) -> String {
    alloc::format!(
        "{:<10} {:<6} dev {:.4} test {:.4} +- {:.4} ({} repeats)",
        r.method.name(),
        r.encoder.name(),
        r.mean_dev,
        r.mean_test,
        r.std_test,
        r.repeats.len()
    )
}
