use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use embfuse::dataset_io::{load_dataset, load_dataset_named, parse_dataset, write_dataset, write_label_map};
use embfuse::embf::{load_embeddings, read_binary, write_binary, write_embeddings, EmbeddingFormat};
use embfuse::wordvec_io::{load_word_vectors, write_word_vectors};
use embfuse_core::theory::generate_fixture_corpus;
use embfuse_core::{EmbeddingSet, Mat};
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn err_text<T: std::fmt::Debug>(r: embfuse::Result<T>) -> String {
    r.unwrap_err().to_string()
}

#[test]
fn golden_file_written_by_numpy() {
    let set = load_embeddings(&data("golden.embf"), EmbeddingFormat::Binary).unwrap();
    assert_eq!((set.n(), set.dim()), (3, 3));
    let expected: [[f32; 3]; 3] = [
        [1.0, -2.5, 0.125],
        [3.0e-8, 65504.0, -0.0],
        [1.0 / 3.0, f32::MIN_POSITIVE, -1.5e10],
    ];
    for (i, row) in expected.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(set.vectors()[(i, j)].to_bits(), (v as f64).to_bits(), "({i}, {j})");
        }
    }
}

#[test]
fn binary_writer_reproduces_golden_bytes() {
    let original = fs::read(data("golden.embf")).unwrap();
    let set = load_embeddings(&data("golden.embf"), EmbeddingFormat::Binary).unwrap();
    let mut out = Vec::new();
    write_binary(&mut out, set.vectors()).unwrap();
    assert_eq!(out, original);
    assert_eq!(&out[..4], b"EMBF");
    assert_eq!(&out[4..8], &[1, 0, 0, 0]);
    assert_eq!(&out[8..16], &[3, 0, 0, 0, 0, 0, 0, 0]);
    assert_eq!(out.len(), 24 + 9 * 4);
}

#[test]
fn three_by_two_example() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.tsv");
    fs::write(&p, "3\t2\n1\t0\n0\t1\n1\t1\n").unwrap();
    let set = load_embeddings(&p, EmbeddingFormat::Tsv).unwrap();
    assert_eq!((set.n(), set.dim()), (3, 2));
    assert_eq!(set.row(2), vec![1.0, 1.0]);
}

#[test]
fn tsv_row_length_error_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.tsv");
    fs::write(&p, "3\t2\n1\t0\n0\t1\t5\n1\t1\n").unwrap();
    let msg = err_text(load_embeddings(&p, EmbeddingFormat::Tsv));
    assert!(msg.contains("row 1") && msg.contains("3 values"), "{msg}");
}

#[test]
fn tsv_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.tsv");
    for (body, needle) in [
        ("", "empty file"),
        ("3 2\n", "bad header"),
        ("2\t2\n1\t0\n", "found 1"),
        ("1\t2\n1\tx\n", "row 0: column 1"),
        ("1\t2\n1\tinf\n", "row 0: non-finite"),
        ("1\t1\n1\n2\n", "row 1: more rows"),
    ] {
        fs::write(&p, body).unwrap();
        let msg = err_text(load_embeddings(&p, EmbeddingFormat::Tsv));
        assert!(msg.contains(needle), "{body:?}: {msg}");
    }
}

#[test]
fn binary_errors() {
    let p = Path::new("mem");
    let good = {
        let mut v = Vec::new();
        write_binary(&mut v, &Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        v
    };
    let read = |bytes: &[u8], len: Option<u64>| read_binary(&mut Cursor::new(bytes.to_vec()), len, p);
    assert!(read(&good, Some(good.len() as u64)).is_ok());
    assert!(read(&good, None).is_ok());

    let mut bad = good.clone();
    bad[0] = b'X';
    assert!(err_text(read(&bad, None)).contains("magic"));
    let mut bad = good.clone();
    bad[4] = 2;
    assert!(err_text(read(&bad, None)).contains("version"));
    assert!(err_text(read(&good[..10], None)).contains("truncated header"));
    let short = &good[..good.len() - 4];
    assert!(err_text(read(short, Some(short.len() as u64))).contains("header says 2 x 2"));
    assert!(err_text(read(short, None)).contains("row 1: truncated"));
    let mut long = good.clone();
    long.push(0);
    assert!(err_text(read(&long, None)).contains("trailing"));
    let mut nan = good.clone();
    nan[24 + 12..24 + 16].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(err_text(read(&nan, None)).contains("row 1: non-finite value in column 1"));
}

#[test]
fn format_from_extension() {
    assert_eq!(EmbeddingFormat::from_path(Path::new("a.tsv")), EmbeddingFormat::Tsv);
    assert_eq!(EmbeddingFormat::from_path(Path::new("a.embf")), EmbeddingFormat::Binary);
    assert_eq!(EmbeddingFormat::from_path(Path::new("a")), EmbeddingFormat::Binary);
}

fn matrix() -> impl Strategy<Value = Mat> {
    (1usize..6, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, n * d)
            .prop_map(move |v| Mat::from_row_slice(n, d, &v))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tsv_round_trip_is_exact(m in matrix()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tsv");
        let set = EmbeddingSet::new(m, "m").unwrap();
        write_embeddings(&p, &set, EmbeddingFormat::Tsv).unwrap();
        let back = load_embeddings(&p, EmbeddingFormat::Tsv).unwrap();
        for (a, b) in set.vectors().iter().zip(back.vectors().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn binary_round_trip_is_bitwise_for_f32_values(m in matrix()) {
        let narrowed = m.map(|x| x as f32 as f64).map(|x| if x.is_finite() { x } else { 0.0 });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.embf");
        let set = EmbeddingSet::new(narrowed, "m").unwrap();
        write_embeddings(&p, &set, EmbeddingFormat::Binary).unwrap();
        let back = load_embeddings(&p, EmbeddingFormat::Binary).unwrap();
        prop_assert_eq!(back.vectors().shape(), set.vectors().shape());
        for (a, b) in set.vectors().iter().zip(back.vectors().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        let q = dir.path().join("again.embf");
        write_embeddings(&q, &back, EmbeddingFormat::Binary).unwrap();
        prop_assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    }
}

#[test]
fn dataset_four_lines() {
    let ds = parse_dataset("0\ta b\n1\tc d\n1\te\n0\tf\n", Path::new("x")).unwrap();
    assert_eq!((ds.len(), ds.num_classes()), (4, 2));
    assert!(ds.split().is_none());
    assert_eq!(ds.labels(), &[0, 1, 1, 0]);
}

#[test]
fn dataset_errors() {
    for (body, needle) in [
        ("0\ta\n2\tb\n", "non-contiguous"),
        ("x\ta\n1\tb\n", "line 1: label \"x\""),
        ("0\ta\n1\t  \n", "line 2: empty text"),
        ("0\ta\n1 b\n", "line 2: expected"),
        ("", "empty file"),
        ("\n\n", "empty file"),
        ("-1\ta\n", "not a non-negative integer"),
    ] {
        let msg = err_text(parse_dataset(body, Path::new("x")));
        assert!(msg.contains(needle), "{body:?}: {msg}");
    }
}

#[test]
fn text_may_contain_tabs_after_the_first() {
    let ds = parse_dataset("0\ta\tb\n1\tc\n", Path::new("x")).unwrap();
    assert_eq!(ds.texts()[0], "a\tb");
}

#[test]
fn string_labels_are_numbered_in_sorted_order() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.tsv");
    fs::write(&p, "pos\tgreat\nneg\tawful\nneutral\tfine\npos\tgood\n").unwrap();
    let (ds, names) = load_dataset_named(&p).unwrap();
    assert_eq!(names, ["neg", "neutral", "pos"]);
    assert_eq!(ds.labels(), &[2, 0, 1, 2]);
    let m = dir.path().join("labels.tsv");
    write_label_map(&m, &names).unwrap();
    assert_eq!(fs::read_to_string(&m).unwrap(), "0\tneg\n1\tneutral\n2\tpos\n");
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.tsv");
    let ds = parse_dataset("1\tx y\n0\tz\n", Path::new("x")).unwrap();
    write_dataset(&p, &ds).unwrap();
    assert_eq!(load_dataset(&p).unwrap(), ds);
}

#[test]
fn bundled_fixture_matches_the_generator() {
    let ds = load_dataset(&data("fixture.tsv")).unwrap();
    assert_eq!((ds.len(), ds.num_classes()), (1000, 2));
    let corpus = generate_fixture_corpus(1000, 0).unwrap();
    assert_eq!(ds.texts(), corpus.dataset.texts());
    assert_eq!(ds.labels(), corpus.dataset.labels());
    let view = load_embeddings(&data("fixture.embf"), EmbeddingFormat::Binary).unwrap();
    assert_eq!((view.n(), view.dim()), (1000, corpus.view.dim()));
    for (a, b) in view.vectors().iter().zip(corpus.view.vectors().iter()) {
        assert_eq!(*a, *b as f32 as f64);
    }
}

#[test]
fn word_vectors_with_and_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("wv.txt");
    fs::write(&p, "good 1 2\nbad -1 -2.5\n").unwrap();
    let wv = load_word_vectors(&p).unwrap();
    assert_eq!((wv.len(), wv.dim()), (2, 2));
    assert_eq!(wv.get("bad"), Some(&[-1.0, -2.5][..]));

    fs::write(&p, "2 2\ngood 1 2\nbad -1 -2.5\n").unwrap();
    assert_eq!(load_word_vectors(&p).unwrap(), wv);

    let q = dir.path().join("out.txt");
    write_word_vectors(&q, &wv).unwrap();
    assert_eq!(load_word_vectors(&q).unwrap(), wv);
    assert!(fs::read_to_string(&q).unwrap().starts_with("2 2\n"));
}

#[test]
fn word_vector_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("wv.txt");
    for (body, needle) in [
        ("a 1 2\nb 1\n", "line 2"),
        ("a 1 x\n", "line 1: value 1"),
        ("3 2\na 1 2\n", "declares 3"),
        ("a\n", "no values"),
        ("a 1\na 2\n", "duplicate"),
        ("", "no word vectors"),
    ] {
        fs::write(&p, body).unwrap();
        let msg = err_text(load_word_vectors(&p));
        assert!(msg.contains(needle), "{body:?}: {msg}");
    }
}
