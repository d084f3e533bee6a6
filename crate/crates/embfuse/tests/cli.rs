use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn embfuse(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embfuse"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

/// Small fixture plus a fast configuration.
fn small_fixture(dir: &Path) -> PathBuf {
    let o = embfuse(&["fixture", "--n", "200", "--wv-dim", "12", "--out-dir", "fx"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = dir.join("fx/fixture.toml");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text = text.replace("filters_per_width = 128", "filters_per_width = 6");
    text = text.replace("epochs = 50", "epochs = 4");
    text = text.replace("repeats = 10", "repeats = 2");
    text = text.replace("learning_rate = 0.001", "learning_rate = 0.01");
    fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn unknown_theory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = embfuse(&["theory", "thm3"], dir.path());
    assert_eq!(code(&o), 2);
    assert_eq!(code(&embfuse(&["frobnicate"], dir.path())), 2);
    assert_eq!(code(&embfuse(&["--threads", "0", "theory", "thm1"], dir.path())), 2);
}

#[test]
fn noiseless_thm1_reports_the_exact_branch() {
    let dir = tempfile::tempdir().unwrap();
    let o = embfuse(
        &["theory", "thm1", "--worlds", "3", "--n", "2000", "--sigmas", "0", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["which"], "thm1");
    let worlds = r["details"].as_array().unwrap();
    assert_eq!(worlds.len(), 3);
    for w in worlds {
        assert!(w["report"]["noiseless_gap"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn failed_assertion_exits_one_and_still_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    // a single test point makes the CCA accuracy 0 or 1
    let o = embfuse(
        &["theory", "thm2", "--d", "1", "--n-train", "300", "--n-test", "1", "--seeds", "1", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("assertion failed: acc_cca"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], false);
}

#[test]
fn invalid_theory_parameters_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = embfuse(&["theory", "thm2", "--d", "8", "--n-train", "10"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_train"));
}

#[test]
fn pipeline_metrics_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let cfg = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let o = embfuse(
            &["--threads", threads, "pipeline", "--config", cfg, "--methods", "view1_only,cat_lock", "--out-dir", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(dir.path().join(out).join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);

    let text = String::from_utf8(outputs.remove(0)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("config_hash,seed,method"));
    // 2 methods x (2 repeats + mean)
    assert_eq!(lines.len(), 1 + 6);
    let hash = lines[1].split(',').next().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(lines[1..].iter().all(|l| l.starts_with(&format!("{hash},0,"))));

    let runs = fs::read_to_string(dir.path().join("a/runs.jsonl")).unwrap();
    assert_eq!(runs.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(runs.lines().next().unwrap()).unwrap();
    assert!(first["wall_time_s"].as_f64().unwrap() > 0.0);
    assert_eq!(first["config_hash"], hash);
}

#[test]
fn seed_flag_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let cfg = cfg.to_str().unwrap();
    let run = |seed: &str, out: &str| {
        let o = embfuse(
            &["pipeline", "--config", cfg, "--methods", "view1_only", "--seed", seed, "--repeats", "1", "--out-dir", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(dir.path().join(out).join("metrics.csv")).unwrap()
    };
    let (a, b) = (run("1", "a"), run("2", "b"));
    let hash = |t: &str| t.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    assert_ne!(hash(&a), hash(&b));
    assert!(b.lines().nth(1).unwrap().contains(",2,view1_only,"));
}

#[test]
fn sweep_writes_one_row_per_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let o = embfuse(
        &[
            "sweep", "--config", cfg.to_str().unwrap(), "--methods", "view1_only,cat_lock", "--sizes", "40,80,160",
            "--repeats", "1", "--out-dir", "s",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "config_hash,seed,size,cat_lock_mean,cat_lock_std,view1_only_mean,view1_only_std");
    let sizes: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(sizes, ["40", "80", "160"]);

    let o = embfuse(
        &["sweep", "--config", cfg.to_str().unwrap(), "--sizes", "80,40", "--out-dir", "s"],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn grid_lists_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let o = embfuse(
        &["grid", "--config", cfg.to_str().unwrap(), "--method", "cat_lock", "--out-dir", "g"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("g/grid.csv")).unwrap();
    // 6 alphas x 7 penalties
    assert_eq!(text.lines().count(), 1 + 42);
    assert!(text.starts_with("config_hash,seed,method,index,alpha,sigma,reg,l2,dev_acc,test_acc,best"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 1);
    let jsonl = fs::read_to_string(dir.path().join("g/grid.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 42);
}

#[test]
fn invalid_specs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let cfg = cfg.to_str().unwrap();
    let o = embfuse(&["pipeline", "--config", cfg, "--methods", "cat_open", "--encoder", "bow"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("trainable encoder"));
    let o = embfuse(&["pipeline", "--methods", "view1_only"], dir.path());
    assert_eq!(code(&o), 2);
    let o = embfuse(
        &["pipeline", "--config", cfg, "--methods", "view1_only", "--embeddings", &data("golden.embf")],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rows"));
}

#[test]
fn combine_fit_save_and_apply() {
    let dir = tempfile::tempdir().unwrap();
    let g = data("golden.embf");
    let o = embfuse(&["combine", "--method", "cat", "--alpha", "2", "--view1", &g, "--view2", &g, "--out", "c.tsv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("c.tsv")).unwrap();
    assert!(text.starts_with("3\t6\n1.0\t-2.5\t0.125\t2.0\t-5.0\t0.25\n"));

    let fx = data("fixture.embf");
    let o = embfuse(
        &["combine", "--method", "cca", "--reg", "1e-3", "--fit-rows", "500", "--view1", &fx, "--view2", &fx, "--out", "a.embf", "--save", "m.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = embfuse(&["combine", "--load", "m.json", "--view1", &fx, "--view2", &fx, "--out", "b.embf"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(dir.path().join("a.embf")).unwrap(), fs::read(dir.path().join("b.embf")).unwrap());

    let o = embfuse(&["combine", "--view1", &g, "--view2", &g, "--out", "x.embf"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn train_encoder_writes_a_loadable_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_fixture(dir.path());
    let o = embfuse(
        &["train-encoder", "--config", cfg.to_str().unwrap(), "--encoder", "cnn_ns", "--out", "enc.json", "--embeddings-out", "v2.embf"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let bundle = embfuse::artifact::load_encoder(&dir.path().join("enc.json")).unwrap();
    assert!(bundle.head.is_some());
    let v2 = embfuse::embf::load_embeddings(&dir.path().join("v2.embf"), embfuse::embf::EmbeddingFormat::Binary).unwrap();
    assert_eq!((v2.n(), v2.dim()), (200, 18));
}
