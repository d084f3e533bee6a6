use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use embfuse::artifact::{self, CombinerArtifact, EncoderBundle};
use embfuse::dataset_io::{load_dataset, load_dataset_named, write_dataset, write_label_map};
use embfuse::embf::{load_embeddings, write_embeddings, EmbeddingFormat};
use embfuse::report::{grid_rows, write_grid_csv, write_jsonl, write_metrics_csv, write_sweep_csv};
use embfuse::settings::{file_digest, Fingerprint, Settings};
use embfuse::theory::{self, Which};
use embfuse::wordvec_io::{load_word_vectors, write_word_vectors};
use embfuse::{driver, Error, Result};
use embfuse_core::combiner::{fit_cca, fit_kcca, CatCombiner, CcaOptions, Combiner, KccaOptions};
use embfuse_core::encoder::{build_vocab, encode_dataset, train_cnn, WordVectors};
use embfuse_core::pipeline::{self, describe, EncoderMode, Method, PipelineData};
use embfuse_core::theory::{fixture_word_vectors, generate_fixture_corpus, Loss};
use embfuse_core::{make_split, EmbeddingSet, LabeledDataset};

#[derive(Parser)]
#[command(name = "embfuse", version, about = "Two-view sentence-embedding fusion experiments")]
struct Cli {
    /// Worker threads; 1 gives a fully sequential run.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit or apply a combiner to two row-aligned embedding files.
    Combine(CombineArgs),
    /// Train the text encoder on a dataset and save it.
    TrainEncoder(TrainArgs),
    /// Repeated runs of one or more methods; writes metrics.csv and runs.jsonl.
    Pipeline(PipelineArgs),
    /// Full grid of one method for a single repeat; writes grid.csv and grid.jsonl.
    Grid(GridArgs),
    /// Training-set size sweep; writes sweep.csv and runs.jsonl.
    Sweep(SweepArgs),
    /// Numerical theorem checks; writes a JSON report, exit status 1 on failure.
    Theory(TheoryArgs),
    /// Writes the planted synthetic corpus, its pre-trained view and a config.
    Fixture(FixtureArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// TOML file with [run], [data] and [pipeline] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides such as `run.repeats=3` or `run.cnn.embed_dim=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Pre-trained view, row-aligned with the dataset (.embf or .tsv).
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    word_vectors: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, value_parser = parse_encoder)]
    encoder: Option<EncoderMode>,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 0)]
    repeat: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    /// Comma-separated, strictly ascending training-set sizes.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output encoder bundle (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write the encoder's embedding of every dataset row.
    #[arg(long)]
    embeddings_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CombineMethod {
    Cat,
    Cca,
    Kcca,
    Residue,
}

#[derive(Args)]
struct CombineArgs {
    #[arg(long)]
    view1: PathBuf,
    #[arg(long)]
    view2: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, required_unless_present = "load")]
    method: Option<CombineMethod>,
    /// Apply a saved combiner instead of fitting one.
    #[arg(long, conflicts_with = "method")]
    load: Option<PathBuf>,
    /// Save the fitted combiner (JSON).
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-5)]
    reg: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Fit on the first N rows only; all rows are transformed.
    #[arg(long)]
    fit_rows: Option<usize>,
    #[arg(long, default_value_t = embfuse_core::combiner::DEFAULT_KERNEL_CAP)]
    kernel_cap: usize,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(value_enum)]
    which: Which,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; defaults to `theory_<which>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo sample size (thm1, thm1_sweep_c).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_loss)]
    loss: Option<Loss>,
    /// Number of random worlds (thm1).
    #[arg(long)]
    worlds: Option<usize>,
    /// Noise levels cycled over the worlds (thm1).
    #[arg(long, value_delimiter = ',')]
    sigmas: Vec<f64>,
    /// Signal scales (thm1_sweep_c).
    #[arg(long, value_delimiter = ',')]
    cs: Vec<f64>,
    /// Noise level (thm1_sweep_c).
    #[arg(long)]
    sigma: Option<f64>,
    /// Shared dimension (thm2, residue).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Number of seeds averaged (thm2, residue).
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension of the written word vectors.
    #[arg(long, default_value_t = 300)]
    wv_dim: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn parse_encoder(s: &str) -> std::result::Result<EncoderMode, String> {
    EncoderMode::parse(s).map_err(|e| e.to_string())
}

fn parse_loss(s: &str) -> std::result::Result<Loss, String> {
    Loss::parse(s).map_err(|e| e.to_string())
}

enum Status {
    Ok,
    Failed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global thread pool is configured once");
    }
    let out = match cli.command {
        Command::Combine(a) => combine(a),
        Command::TrainEncoder(a) => train_encoder(a),
        Command::Pipeline(a) => run_pipeline(a),
        Command::Grid(a) => grid(a),
        Command::Sweep(a) => sweep(a),
        Command::Theory(a) => run_theory(a),
        Command::Fixture(a) => fixture(a),
    };
    match out {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

struct Inputs {
    settings: Settings,
    dataset: LabeledDataset,
    view1: Option<EmbeddingSet>,
    word_vectors: Option<WordVectors>,
    digests: Vec<Option<String>>,
}

impl Inputs {
    fn data(&self) -> PipelineData<'_> {
        PipelineData {
            dataset: &self.dataset,
            view1: self.view1.as_ref(),
            word_vectors: self.word_vectors.as_ref(),
        }
    }

    fn hash(&self, methods: &[Method], sizes: &[usize]) -> String {
        Fingerprint {
            run: &self.settings.run,
            methods,
            encoder: self.settings.pipeline.encoder,
            sizes,
            inputs: self.digests.clone(),
        }
        .hash()
    }
}

fn settings_from(a: &DataArgs) -> Result<Settings> {
    let mut s = Settings::load(a.config.as_deref(), &a.overrides)?;
    if let Some(p) = &a.data {
        s.data.dataset = Some(p.clone());
    }
    if let Some(p) = &a.embeddings {
        s.data.embeddings = Some(p.clone());
    }
    if let Some(p) = &a.word_vectors {
        s.data.word_vectors = Some(p.clone());
    }
    if let Some(v) = a.seed {
        s.run.seed = v;
    }
    if let Some(v) = a.repeats {
        s.run.repeats = v;
    }
    if let Some(e) = a.encoder {
        s.pipeline.encoder = e;
    }
    s.run.validate().map_err(|e| Error::usage(e.to_string()))?;
    Ok(s)
}

fn load_inputs(a: &DataArgs, out_dir: Option<&Path>) -> Result<Inputs> {
    let settings = settings_from(a)?;
    let d = &settings.data;
    let ds_path = d
        .dataset
        .clone()
        .ok_or_else(|| Error::usage("no dataset given (--data or [data] dataset)"))?;
    let dataset = if d.string_labels {
        let (ds, names) = load_dataset_named(&ds_path)?;
        if let Some(dir) = out_dir {
            write_label_map(&dir.join("labels.tsv"), &names)?;
        }
        ds
    } else {
        load_dataset(&ds_path)?
    };
    let view1 = d
        .embeddings
        .as_ref()
        .map(|p| load_embeddings(p, EmbeddingFormat::from_path(p)))
        .transpose()?;
    let word_vectors = d.word_vectors.as_deref().map(load_word_vectors).transpose()?;
    let digests = [Some(&ds_path), d.embeddings.as_ref(), d.word_vectors.as_ref()]
        .into_iter()
        .map(|p| p.map(|p| file_digest(p)).transpose())
        .collect::<Result<_>>()?;
    Ok(Inputs {
        settings,
        dataset,
        view1,
        word_vectors,
        digests,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(&dir, e))
}

fn pick_methods(flag: Vec<Method>, s: &Settings) -> Vec<Method> {
    if flag.is_empty() {
        s.pipeline.methods.clone()
    } else {
        flag
    }
}

fn run_pipeline(a: PipelineArgs) -> Result<Status> {
    ensure_dir(&a.out_dir)?;
    let inputs = load_inputs(&a.data, Some(&a.out_dir))?;
    let methods = pick_methods(a.methods, &inputs.settings);
    let cfg = &inputs.settings.run;
    let hash = inputs.hash(&methods, &[]);
    let out = driver::run_repeats(&methods, inputs.settings.pipeline.encoder, inputs.data(), cfg, None, &hash)?;
    write_metrics_csv(&a.out_dir.join("metrics.csv"), &hash, cfg.seed, &out.results)?;
    write_jsonl(&a.out_dir.join("runs.jsonl"), &out.runs)?;
    for r in &out.results {
        println!("{}", describe(r));
    }
    println!("config {hash}");
    Ok(Status::Ok)
}

fn grid(a: GridArgs) -> Result<Status> {
    ensure_dir(&a.out_dir)?;
    let inputs = load_inputs(&a.data, Some(&a.out_dir))?;
    let cfg = &inputs.settings.run;
    let encoder = inputs.settings.pipeline.encoder;
    let methods = [a.method];
    pipeline::validate_methods(&methods, encoder, &inputs.data(), cfg)?;
    let hash = inputs.hash(&methods, &[]);
    let results = pipeline::run_repeat(&methods, encoder, inputs.data(), cfg, a.repeat, None)?;
    let mut rows = Vec::new();
    for r in &results {
        rows.extend(grid_rows(&hash, cfg.seed, r.method.name(), &r.grid));
    }
    write_grid_csv(&a.out_dir.join("grid.csv"), &rows)?;
    write_jsonl(&a.out_dir.join("grid.jsonl"), &rows)?;
    for r in &results {
        let best = r.grid.best_entry();
        println!(
            "{} repeat {}: {} points, best {} dev {:.4} test {:.4}",
            r.method.name(),
            r.repeat,
            r.grid.entries.len(),
            best.params.describe(),
            best.dev_acc,
            best.test_acc
        );
    }
    Ok(Status::Ok)
}

fn sweep(a: SweepArgs) -> Result<Status> {
    ensure_dir(&a.out_dir)?;
    let inputs = load_inputs(&a.data, Some(&a.out_dir))?;
    let methods = pick_methods(a.methods, &inputs.settings);
    let sizes = if a.sizes.is_empty() {
        inputs.settings.pipeline.sizes.clone()
    } else {
        a.sizes
    };
    let cfg = &inputs.settings.run;
    let hash = inputs.hash(&methods, &sizes);
    let (points, runs) = driver::run_sweep(&methods, inputs.settings.pipeline.encoder, inputs.data(), cfg, &sizes, &hash)?;
    write_sweep_csv(&a.out_dir.join("sweep.csv"), &hash, cfg.seed, &points)?;
    write_jsonl(&a.out_dir.join("runs.jsonl"), &runs)?;
    for p in &points {
        for r in &p.results {
            println!("size {:>6}  {}", p.size, describe(r));
        }
    }
    Ok(Status::Ok)
}

fn train_encoder(a: TrainArgs) -> Result<Status> {
    let inputs = load_inputs(&a.data, None)?;
    let s = &inputs.settings;
    let mode = s
        .pipeline
        .encoder
        .cnn_mode()
        .ok_or_else(|| Error::usage("train-encoder needs --encoder cnn_r, cnn_s or cnn_ns"))?;
    let cfg = &s.run;
    let ds = match inputs.dataset.split() {
        Some(_) => inputs.dataset.clone(),
        None => make_split(&inputs.dataset, cfg.split_fractions, cfg.seed, cfg.split_mode)?,
    };
    let vocab = build_vocab(&ds);
    let t = train_cnn(&ds, &vocab, mode, inputs.word_vectors.as_ref(), &cfg.cnn, &cfg.encoder, cfg.seed)?;
    for (epoch, acc) in t.dev_history.iter().enumerate() {
        println!("epoch {epoch:>3}  dev {acc:.4}");
    }
    println!("best epoch {} dev {:.4}", t.best_epoch, t.best_dev());
    if let Some(p) = &a.embeddings_out {
        write_embeddings(p, &encode_dataset(&ds, &vocab, &t.cnn)?, EmbeddingFormat::from_path(p))?;
    }
    artifact::save_json(&a.out, &EncoderBundle::new(vocab, t.cnn, Some(t.head)))?;
    Ok(Status::Ok)
}

fn combine(a: CombineArgs) -> Result<Status> {
    let v1 = load_embeddings(&a.view1, EmbeddingFormat::from_path(&a.view1))?;
    let v2 = load_embeddings(&a.view2, EmbeddingFormat::from_path(&a.view2))?;
    let combiner = match (&a.load, a.method) {
        (Some(p), _) => artifact::load_combiner(p)?.combiner,
        (None, Some(m)) => {
            let n = a.fit_rows.unwrap_or(v1.n()).min(v1.n());
            let rows: Vec<usize> = (0..n).collect();
            let (f1, f2) = (v1.select(&rows), v2.select(&rows));
            match m {
                CombineMethod::Cat => Combiner::Cat(CatCombiner::new(a.alpha)?),
                CombineMethod::Cca => Combiner::Cca(fit_cca(&f1, &f2, CcaOptions::new(a.reg))?),
                CombineMethod::Residue => Combiner::Residue(fit_cca(&f1, &f2, CcaOptions::new(a.reg))?),
                CombineMethod::Kcca => Combiner::Kcca(fit_kcca(
                    &f1,
                    &f2,
                    KccaOptions {
                        kernel_cap: a.kernel_cap,
                        ..KccaOptions::new(a.sigma, a.reg)
                    },
                )?),
            }
        }
        (None, None) => return Err(Error::usage("give --method or --load")),
    };
    let out = combiner.combine(&v1, &v2)?;
    write_embeddings(&a.out, &out, EmbeddingFormat::from_path(&a.out))?;
    if let Some(p) = &a.save {
        artifact::save_json(p, &CombinerArtifact::new(combiner.clone()))?;
    }
    println!("{}: {} rows x {} dims -> {}", combiner.kind(), out.n(), out.dim(), a.out.display());
    Ok(Status::Ok)
}

fn run_theory(a: TheoryArgs) -> Result<Status> {
    let report = match a.which {
        Which::Thm1 => {
            let d = theory::Thm1Params::default();
            let p = theory::Thm1Params {
                worlds: a.worlds.unwrap_or(d.worlds),
                n: a.n.unwrap_or(d.n),
                sigmas: if a.sigmas.is_empty() { d.sigmas } else { a.sigmas },
                loss: a.loss.unwrap_or(d.loss),
            };
            theory::run_thm1(&p, a.seed)?
        }
        Which::Thm1SweepC => {
            let d = theory::SweepParams::default();
            let p = theory::SweepParams {
                cs: if a.cs.is_empty() { d.cs } else { a.cs },
                sigma: a.sigma.unwrap_or(d.sigma),
                n: a.n.unwrap_or(d.n),
                loss: a.loss.unwrap_or(d.loss),
            };
            theory::run_sweep_c(&p, a.seed)?
        }
        Which::Thm2 | Which::Residue => {
            let d = theory::Thm2Params::default();
            let p = theory::Thm2Params {
                d: a.d.unwrap_or(d.d),
                n_train: a.n_train.unwrap_or(d.n_train),
                n_test: a.n_test.unwrap_or(d.n_test),
                seeds: a.seeds.unwrap_or(d.seeds),
            };
            if a.which == Which::Thm2 {
                theory::run_thm2(&p, a.seed)?
            } else {
                theory::run_residue(&p, a.seed)?
            }
        }
    };
    let name = a.which.to_possible_value().expect("no skipped variants").get_name().to_string();
    let out = a.out.unwrap_or_else(|| PathBuf::from(format!("theory_{name}.json")));
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(&out, text + "\n").map_err(|e| Error::io(&out, e))?;
    for x in &report.assertions {
        println!("{:<4} {}", if x.holds { "ok" } else { "FAIL" }, x.describe());
    }
    for x in report.failures() {
        eprintln!("assertion failed: {}", x.describe());
    }
    println!("{name}: {} -> {}", if report.passed { "passed" } else { "FAILED" }, out.display());
    Ok(if report.passed { Status::Ok } else { Status::Failed })
}

fn fixture(a: FixtureArgs) -> Result<Status> {
    ensure_dir(&a.out_dir)?;
    let corpus = generate_fixture_corpus(a.n, a.seed)?;
    let wv = fixture_word_vectors(a.wv_dim, a.seed)?;
    let dir = &a.out_dir;
    write_dataset(&dir.join("fixture.tsv"), &corpus.dataset)?;
    write_embeddings(&dir.join("fixture.embf"), &corpus.view, EmbeddingFormat::Binary)?;
    write_word_vectors(&dir.join("fixture_wv.txt"), &wv)?;
    let domain: String = corpus.text_only.iter().map(|&t| if t { "1\n" } else { "0\n" }).collect();
    std::fs::write(dir.join("fixture_domain.txt"), domain).map_err(|e| Error::io(&dir.join("fixture_domain.txt"), e))?;
    let mut s = Settings::default();
    s.run.seed = a.seed;
    s.run.cnn.embed_dim = a.wv_dim;
    s.data.dataset = Some("fixture.tsv".into());
    s.data.embeddings = Some("fixture.embf".into());
    s.data.word_vectors = Some("fixture_wv.txt".into());
    s.pipeline.methods = vec![Method::View1Only, Method::CatLock, Method::CatOpen];
    s.pipeline.sizes = vec![100, 200, 500, 800];
    let cfg_path = dir.join("fixture.toml");
    std::fs::write(&cfg_path, s.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    println!("wrote {} sentences to {}", a.n, dir.display());
    Ok(Status::Ok)
}
