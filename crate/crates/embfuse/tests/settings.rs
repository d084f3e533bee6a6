use std::fs;

use embfuse::settings::{Fingerprint, Settings};
use embfuse_core::pipeline::{EncoderMode, Method};
use embfuse_core::RunConfig;

#[test]
fn defaults_without_a_file() {
    let s = Settings::load(None, &[]).unwrap();
    assert_eq!(s.run, RunConfig::default());
    assert_eq!(s.pipeline.encoder, EncoderMode::CnnR);
}

#[test]
fn file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    fs::write(
        &p,
        "[run]\nseed = 5\nrepeats = 3\nl2_grid = [0.1, 1.0]\n[run.cnn]\nembed_dim = 20\n\
         [data]\ndataset = \"d.tsv\"\n[pipeline]\nmethods = [\"cat_lock\"]\nencoder = \"bow\"\n",
    )
    .unwrap();
    let s = Settings::load(Some(&p), &["run.repeats=7".into(), "run.cnn.widths=[2, 3]".into()]).unwrap();
    assert_eq!(s.run.seed, 5);
    assert_eq!(s.run.repeats, 7);
    assert_eq!(s.run.l2_grid, vec![0.1, 1.0]);
    assert_eq!(s.run.cnn.embed_dim, 20);
    assert_eq!(s.run.cnn.widths, vec![2, 3]);
    assert_eq!(s.run.cnn.filters_per_width, 128);
    assert_eq!(s.data.dataset.as_deref(), Some(dir.path().join("d.tsv").as_path()));
    assert_eq!(s.pipeline.methods, vec![Method::CatLock]);
    assert_eq!(s.pipeline.encoder, EncoderMode::Bow);
}

#[test]
fn rejects_typos_and_bad_values() {
    assert!(Settings::load(None, &["run.repeat=3".into()]).is_err());
    assert!(Settings::load(None, &["run.repeats=0".into()]).is_err());
    assert!(Settings::load(None, &["run.alpha_grid=[-1.0]".into()]).is_err());
    assert!(Settings::load(None, &["pipeline.encoder=cnn_x".into()]).is_err());
    assert!(Settings::load(None, &["no_equals".into()]).is_err());
}

#[test]
fn toml_round_trip() {
    let mut s = Settings::default();
    s.run.seed = 11;
    s.pipeline.sizes = vec![10, 20];
    let text = s.to_toml();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.toml");
    fs::write(&p, text).unwrap();
    assert_eq!(Settings::load(Some(&p), &[]).unwrap(), s);
}

#[test]
fn hash_tracks_every_input() {
    let run = RunConfig::default();
    let base = Fingerprint {
        run: &run,
        methods: &[Method::CatLock],
        encoder: EncoderMode::CnnR,
        sizes: &[],
        inputs: vec![Some("aa".into()), None, None],
    };
    let h = base.hash();
    assert_eq!(h.len(), 64);
    assert_eq!(h, Fingerprint { inputs: base.inputs.clone(), ..base }.hash());
    let other_run = RunConfig { seed: 1, ..RunConfig::default() };
    assert_ne!(h, Fingerprint { run: &other_run, inputs: base.inputs.clone(), ..base }.hash());
    assert_ne!(h, Fingerprint { encoder: EncoderMode::Bow, inputs: base.inputs.clone(), ..base }.hash());
    assert_ne!(h, Fingerprint { inputs: vec![Some("ab".into()), None, None], ..base }.hash());
}
