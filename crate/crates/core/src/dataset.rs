//! Labelled sentences and their train/dev/test partition.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng;

/// Three disjoint index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Checks disjointness and coverage of `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.dev).chain(&self.test) {
            if i >= n {
                return Err(Error::invalid(alloc::format!("split index {i} out of range {n}")));
            }
            if seen[i] {
                return Err(Error::invalid(alloc::format!("split index {i} appears twice")));
            }
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(alloc::format!("split does not cover row {missing}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SplitMode {
    #[default]
    Stratified,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    texts: Vec<String>,
    labels: Vec<usize>,
    num_classes: usize,
    split: Option<Split>,
}

impl LabeledDataset {
    /// Labels must be contiguous from 0 and every text non-empty.
    pub fn new(texts: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        if texts.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: texts.len(),
                actual: labels.len(),
                context: "labels vs texts",
            });
        }
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::BadRow {
                row: i,
                message: "empty text".into(),
            });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        let mut present = vec![false; num_classes];
        for &l in &labels {
            present[l] = true;
        }
        if let Some(k) = present.iter().position(|p| !p) {
            return Err(Error::NonContiguousLabels(alloc::format!(
                "label {k} is missing but {} is present",
                num_classes - 1
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        Ok(LabeledDataset {
            texts,
            labels,
            num_classes,
            split: None,
        })
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        split.validate(self.len())?;
        let mut in_train = vec![false; self.num_classes];
        for &i in &split.train {
            in_train[self.labels[i]] = true;
        }
        if let Some(k) = in_train.iter().position(|p| !p) {
            return Err(Error::invalid(alloc::format!("class {k} absent from train split")));
        }
        self.split = Some(split);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn require_split(&self) -> Result<&Split> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset has no train/dev/test split"))
    }

    pub fn labels_at(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Copy with labels replaced (same texts and split).
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        let mut ds = LabeledDataset::new(self.texts.clone(), labels)?;
        if let Some(s) = &self.split {
            ds = ds.with_split(s.clone())?;
        }
        Ok(ds)
    }

    fn class_members(&self, indices: &[usize]) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_classes];
        for &i in indices {
            members[self.labels[i]].push(i);
        }
        members
    }
}

/// Split sizes for `n` items by largest remainder, so they sum to `n` exactly.
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - counts[a] as f64;
        let fb = quotas[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Rounds the class-by-split table `class_sizes[k] * split_sizes[s] / n`
/// so each row sums to its class size, each column to its split size, and
/// every cell is the floor or ceiling of its quota.
fn controlled_rounding(class_sizes: &[usize], split_sizes: &[usize]) -> Vec<Vec<usize>> {
    let n: usize = class_sizes.iter().sum();
    let mut table = vec![vec![0usize; split_sizes.len()]; class_sizes.len()];
    let mut need: Vec<usize> = split_sizes.to_vec();
    let mut fracs = vec![vec![0.0; split_sizes.len()]; class_sizes.len()];
    for (k, &m) in class_sizes.iter().enumerate() {
        for (s, &ns) in split_sizes.iter().enumerate() {
            let exact = (m * ns) as f64 / n as f64;
            let fl = (m * ns) / n;
            table[k][s] = fl;
            fracs[k][s] = exact - fl as f64;
            need[s] -= fl;
        }
    }
    // Leftover units form a bipartite b-matching between classes and splits
    // (one unit per fractional cell); fill it by augmenting paths.
    let allowed: Vec<Vec<bool>> = fracs.iter().map(|r| r.iter().map(|f| *f > 1e-12).collect()).collect();
    let mut extra = vec![vec![false; split_sizes.len()]; class_sizes.len()];
    for (k, &m) in class_sizes.iter().enumerate() {
        let leftover = m - table[k].iter().sum::<usize>();
        for _ in 0..leftover {
            let mut seen_split = vec![false; split_sizes.len()];
            augment(k, &allowed, &mut extra, &mut need, &mut seen_split);
        }
    }
    for (k, row) in extra.iter().enumerate() {
        for (s, &e) in row.iter().enumerate() {
            table[k][s] += e as usize;
        }
    }
    table
}

fn augment(
    k: usize,
    allowed: &[Vec<bool>],
    extra: &mut [Vec<bool>],
    need: &mut [usize],
    seen_split: &mut [bool],
) -> bool {
    let splits = need.len();
    let mut order: Vec<usize> = (0..splits).collect();
    order.sort_by_key(|&s| core::cmp::Reverse(need[s]));
    for s in order {
        if !allowed[k][s] || extra[k][s] || seen_split[s] {
            continue;
        }
        seen_split[s] = true;
        if need[s] > 0 {
            extra[k][s] = true;
            need[s] -= 1;
            return true;
        }
        // split s is full: try to move one of its units to another split
        for j in 0..extra.len() {
            if j != k && extra[j][s] {
                extra[j][s] = false;
                need[s] += 1;
                if augment(j, allowed, extra, need, seen_split) {
                    extra[k][s] = true;
                    need[s] -= 1;
                    return true;
                }
                extra[j][s] = true;
                need[s] -= 1;
            }
        }
    }
    false
}

/// Partitions the dataset into train/dev/test with the given fractions.
///
/// Stratified mode keeps every class's share of each split within one item
/// of proportional; uniform mode is a plain shuffle-and-cut. Index lists are
/// returned in ascending order.
pub fn make_split(
    ds: &LabeledDataset,
    fractions: (f64, f64, f64),
    seed: u64,
    mode: SplitMode,
) -> Result<LabeledDataset> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| !(*f > 0.0)) || libm::fabs(fr.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(Error::invalid(alloc::format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    let n = ds.len();
    let sizes = apportion(n, &fr);
    if sizes.contains(&0) {
        return Err(Error::invalid(alloc::format!(
            "dataset of {n} rows leaves an empty split with fractions {fractions:?}"
        )));
    }
    let mut rng = rng::rng(seed);
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    match mode {
        SplitMode::Stratified => {
            let all: Vec<usize> = (0..n).collect();
            let members = ds.class_members(&all);
            for (k, m) in members.iter().enumerate() {
                if m.len() < 3 {
                    return Err(Error::Stratification {
                        class: k,
                        count: m.len(),
                        needed: 3,
                    });
                }
            }
            let class_sizes: Vec<usize> = members.iter().map(Vec::len).collect();
            let table = controlled_rounding(&class_sizes, &sizes);
            for (k, mut m) in members.into_iter().enumerate() {
                rng::shuffle(&mut rng, &mut m);
                let mut it = m.into_iter();
                for (s, part) in parts.iter_mut().enumerate() {
                    part.extend(it.by_ref().take(table[k][s]));
                }
            }
        }
        SplitMode::Uniform => {
            let mut all: Vec<usize> = (0..n).collect();
            rng::shuffle(&mut rng, &mut all);
            let mut it = all.into_iter();
            for (s, part) in parts.iter_mut().enumerate() {
                part.extend(it.by_ref().take(sizes[s]));
            }
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, dev, test] = parts;
    ds.clone().with_split(Split { train, dev, test })
}

/// Replaces the train split with a stratified random subset of size `m`.
pub fn subsample_train(ds: &LabeledDataset, m: usize, seed: u64) -> Result<LabeledDataset> {
    let split = ds.require_split()?;
    if m < ds.num_classes() {
        return Err(Error::invalid(alloc::format!(
            "subsample size {m} is smaller than the number of classes {}",
            ds.num_classes()
        )));
    }
    if m > split.train.len() {
        return Err(Error::invalid(alloc::format!(
            "subsample size {m} exceeds train split size {}",
            split.train.len()
        )));
    }
    let members = ds.class_members(&split.train);
    let weights: Vec<f64> = members.iter().map(|c| c.len() as f64).collect();
    let mut counts = apportion(m, &weights);
    // keep every class represented
    for k in 0..counts.len() {
        if counts[k] == 0 {
            let donor = (0..counts.len()).max_by_key(|&j| (counts[j], core::cmp::Reverse(j))).unwrap();
            counts[donor] -= 1;
            counts[k] = 1;
        }
    }
    let mut rng = rng::rng(seed);
    let mut train = Vec::with_capacity(m);
    for (k, mut c) in members.into_iter().enumerate() {
        rng::shuffle(&mut rng, &mut c);
        train.extend(c.into_iter().take(counts[k]));
    }
    train.sort_unstable();
    let new_split = Split {
        train,
        dev: split.dev.clone(),
        test: split.test.clone(),
    };
    let mut out = ds.clone();
    out.split = Some(new_split);
    Ok(out)
}
