use embfuse::artifact::{load_combiner, load_encoder, save_json, CombinerArtifact, EncoderBundle};
use embfuse_core::combiner::{fit_cca, fit_kcca, CatCombiner, CcaOptions, Combiner, KccaOptions};
use embfuse_core::encoder::{build_vocab, CnnConfig, EmbeddingMode, TextCnn};
use embfuse_core::rng;
use embfuse_core::{EmbeddingSet, LabeledDataset, Mat};

fn views(n: usize, seed: u64) -> (EmbeddingSet, EmbeddingSet) {
    let mut r = rng::rng(seed);
    let z = Mat::from_fn(n, 2, |_, _| rng::normal(&mut r));
    let a = Mat::from_fn(n, 3, |i, j| z[(i, j % 2)] + 0.1 * rng::normal(&mut r));
    let b = Mat::from_fn(n, 4, |i, j| z[(i, (j + 1) % 2)] + 0.1 * rng::normal(&mut r));
    (EmbeddingSet::new(a, "a").unwrap(), EmbeddingSet::new(b, "b").unwrap())
}

#[test]
fn combiners_survive_a_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = views(60, 1);
    let cca = fit_cca(&a, &b, CcaOptions::new(1e-3)).unwrap();
    let all = [
        Combiner::Cat(CatCombiner::new(0.5).unwrap()),
        Combiner::Cca(cca.clone()),
        Combiner::Residue(cca),
        Combiner::Kcca(fit_kcca(&a, &b, KccaOptions::new(1.0, 1e-2)).unwrap()),
    ];
    for c in all {
        let p = dir.path().join(format!("{}.json", c.kind()));
        save_json(&p, &CombinerArtifact::new(c.clone())).unwrap();
        let back = load_combiner(&p).unwrap().combiner;
        assert_eq!(back, c);
        let (x, y) = (c.combine(&a, &b).unwrap(), back.combine(&a, &b).unwrap());
        assert_eq!(x.vectors(), y.vectors());
    }
}

#[test]
fn encoder_bundle_round_trip_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let ds = LabeledDataset::new(
        vec!["good film".into(), "bad film".into(), "good plot".into()],
        vec![1, 0, 1],
    )
    .unwrap();
    let vocab = build_vocab(&ds);
    let cfg = CnnConfig {
        embed_dim: 4,
        filters_per_width: 2,
        widths: vec![2, 3],
        max_len: 8,
        dropout: 0.0,
    };
    let cnn = TextCnn::new(cfg, &vocab, EmbeddingMode::RandomTrainable, None, 3).unwrap();
    let bundle = EncoderBundle::new(vocab.clone(), cnn.clone(), None);
    let p = dir.path().join("enc.json");
    save_json(&p, &bundle).unwrap();
    let back = load_encoder(&p).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.vocab.get("film"), vocab.get("film"));

    let mut broken = bundle.clone();
    broken.cnn.banks[1].bias.pop();
    save_json(&p, &broken).unwrap();
    assert!(load_encoder(&p).unwrap_err().to_string().contains("wrong shape"));

    let mut broken = bundle.clone();
    broken.cnn.vocab_size += 1;
    save_json(&p, &broken).unwrap();
    assert!(load_encoder(&p).is_err());

    let mut broken = bundle;
    broken.format = "something-else".into();
    save_json(&p, &broken).unwrap();
    assert!(load_encoder(&p).unwrap_err().to_string().contains("format"));
}
