use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;

use crate::dataset::LabeledDataset;
use crate::embedding::{EmbeddingSet, Mat};
use crate::encoder::{tokenize, WordVectors};
use crate::error::{Error, Result};
use crate::rng;

pub const FIXTURE_VIEW_DIM: usize = 64;

/// General sentiment words: the synthetic pre-trained view encodes these.
const GENERAL_POS: [&str; 30] = [
    "great", "excellent", "wonderful", "fantastic", "superb", "amazing", "lovely", "delightful", "brilliant",
    "outstanding", "terrific", "pleasant", "marvelous", "splendid", "awesome", "perfect", "impressive", "enjoyable",
    "fabulous", "remarkable", "superior", "stellar", "charming", "admirable", "exceptional", "fine", "nice", "solid",
    "good", "favorable",
];
const GENERAL_NEG: [&str; 30] = [
    "terrible", "awful", "horrible", "dreadful", "poor", "bad", "disappointing", "lousy", "mediocre", "pathetic",
    "miserable", "unpleasant", "atrocious", "abysmal", "inferior", "subpar", "annoying", "frustrating", "useless",
    "worthless", "dismal", "shoddy", "crummy", "unacceptable", "lame", "weak", "inadequate", "horrendous", "faulty",
    "deficient",
];
/// Domain words the pre-trained view does not know; only the text has them.
const DOMAIN_POS: [&str; 4] = ["sturdy", "snappy", "rugged", "zippy"];
const DOMAIN_NEG: [&str; 4] = ["flimsy", "laggy", "wobbly", "glitchy"];

const NOUNS: [&str; 12] = [
    "phone", "case", "charger", "cable", "speaker", "headset", "keyboard", "lamp", "blender", "camera", "router",
    "monitor",
];
const ADVERBS: [&str; 5] = ["very", "really", "quite", "pretty", "rather"];
const TAILS: [&str; 6] = ["overall", "so far", "after a week", "for the price", "in daily use", "honestly"];

/// Planted two-view corpus. Half the sentences carry a general sentiment
/// word, the other half a domain word; the pre-trained view sees only the
/// former, so the views hold complementary label signal.
#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub dataset: LabeledDataset,
    /// Synthetic pre-trained sentence embeddings, `n x FIXTURE_VIEW_DIM`.
    pub view: EmbeddingSet,
    /// Whether sentence `i` carries its cue only in the text.
    pub text_only: Vec<bool>,
}

fn sentence(r: &mut rng::Rng, cue: &str) -> String {
    let noun = NOUNS[r.random_range(0..NOUNS.len())];
    let adv = ADVERBS[r.random_range(0..ADVERBS.len())];
    let tail = TAILS[r.random_range(0..TAILS.len())];
    match r.random_range(0..5) {
        0 => alloc::format!("the {noun} is {cue}"),
        1 => alloc::format!("this {noun} was {cue} {tail}"),
        2 => alloc::format!("i think the {noun} feels {cue}"),
        3 => alloc::format!("my new {noun} seems {adv} {cue} {tail}"),
        _ => alloc::format!("honestly , the {noun} is {adv} {cue} ."),
    }
}

/// Per-word vectors of the synthetic pre-trained model: random for every
/// known word, plus a shared sentiment direction for general cue words.
/// Domain words all map to one shared unknown-word vector.
fn view_lexicon(seed: u64) -> (BTreeMap<String, Vec<f64>>, Vec<f64>) {
    let mut r = rng::child(seed, 0x7669);
    let d = FIXTURE_VIEW_DIM;
    let scale = 1.0 / libm::sqrt(d as f64);
    let draw = |r: &mut rng::Rng| -> Vec<f64> { (0..d).map(|_| scale * rng::normal(r)).collect() };
    let mut direction = draw(&mut r);
    let norm = libm::sqrt(direction.iter().map(|x| x * x).sum::<f64>());
    direction.iter_mut().for_each(|x| *x /= norm);
    let unknown = draw(&mut r);
    let mut lex = BTreeMap::new();
    let mut known: Vec<&str> = Vec::new();
    known.extend(NOUNS);
    known.extend(ADVERBS);
    known.extend(TAILS.iter().flat_map(|t| t.split(' ')));
    known.extend(["the", "is", "this", "was", "i", "think", "feels", "my", "new", "seems", "honestly", ",", "."]);
    for w in known {
        if !lex.contains_key(w) {
            let v = draw(&mut r);
            lex.insert(w.to_string(), v);
        }
    }
    for (words, sign) in [(&GENERAL_POS, 1.0), (&GENERAL_NEG, -1.0)] {
        for w in words.iter() {
            let mut v = draw(&mut r);
            for (x, u) in v.iter_mut().zip(&direction) {
                *x += sign * u;
            }
            lex.insert(w.to_string(), v);
        }
    }
    (lex, unknown)
}

/// Deterministic planted corpus of `n` sentences with exactly balanced labels.
pub fn generate_fixture_corpus(n: usize, seed: u64) -> Result<FixtureCorpus> {
    if n < 100 {
        return Err(Error::invalid("fixture corpus needs n >= 100"));
    }
    let (lex, unknown) = view_lexicon(seed);
    let mut r = rng::child(seed, 0x74657874);
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut r, &mut order);
    let mut texts = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut text_only = Vec::with_capacity(n);
    let mut view = Mat::zeros(n, FIXTURE_VIEW_DIM);
    for (i, &slot) in order.iter().enumerate() {
        let label = slot % 2;
        let domain = (slot / 2) % 2 == 1;
        let pool: &[&str] = match (domain, label) {
            (false, 1) => &GENERAL_POS,
            (false, _) => &GENERAL_NEG,
            (true, 1) => &DOMAIN_POS,
            (true, _) => &DOMAIN_NEG,
        };
        let cue = pool[r.random_range(0..pool.len())];
        let text = sentence(&mut r, cue);
        let toks = tokenize(&text);
        for t in &toks {
            let v = lex.get(t.as_str()).unwrap_or(&unknown);
            for (j, x) in v.iter().enumerate() {
                view[(i, j)] += x / toks.len() as f64;
            }
        }
        for j in 0..FIXTURE_VIEW_DIM {
            view[(i, j)] += 0.02 * rng::normal(&mut r);
        }
        texts.push(text);
        labels.push(label);
        text_only.push(domain);
    }
    Ok(FixtureCorpus {
        dataset: LabeledDataset::new(texts, labels)?,
        view: EmbeddingSet::new(view, "fixture-pretrained")?,
        text_only,
    })
}

/// `dim`-dimensional word vectors for the fixture vocabulary, usable to
/// initialise the text encoder. General cue words share a sentiment axis;
/// domain words are random.
pub fn fixture_word_vectors(dim: usize, seed: u64) -> Result<WordVectors> {
    let mut r = rng::child(seed, 0x7776);
    let mut axis: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
    let norm = libm::sqrt(axis.iter().map(|x| x * x).sum::<f64>());
    axis.iter_mut().for_each(|x| *x *= 0.5 / norm);
    let mut wv = WordVectors::new(dim);
    let mut words: Vec<&str> = Vec::new();
    words.extend(NOUNS);
    words.extend(ADVERBS);
    words.extend(TAILS.iter().flat_map(|t| t.split(' ')));
    words.extend(["the", "is", "this", "was", "i", "think", "feels", "my", "new", "seems", "honestly", ",", "."]);
    words.extend(GENERAL_POS);
    words.extend(GENERAL_NEG);
    words.extend(DOMAIN_POS);
    words.extend(DOMAIN_NEG);
    for w in words {
        if wv.get(w).is_some() {
            continue;
        }
        let mut v: Vec<f64> = (0..dim).map(|_| 0.1 * rng::normal(&mut r)).collect();
        let sign = if GENERAL_POS.contains(&w) {
            1.0
        } else if GENERAL_NEG.contains(&w) {
            -1.0
        } else {
            0.0
        };
        for (x, a) in v.iter_mut().zip(&axis) {
            *x += sign * a;
        }
        wv.insert(w.to_string(), v)?;
    }
    Ok(wv)
}
