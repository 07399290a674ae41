use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use autoeval::classifier::{import_feature_bundle, TinyClassifier};
use autoeval::codec::hex_digest;
use autoeval::harness::{
    check_thresholds, fit_predictors, method_names, predict_bundle, reference_stats, run_correlation_study,
    run_method_comparison, run_robustness_suite, run_size_ablation, scatter_text, train_reference_classifier,
    ExperimentConfig, Pipeline, ReportMeta, LINEAR, NEURAL,
};
use autoeval::metaset::{BackgroundCorpus, manifest_hash, read_manifest, write_manifest, MetaDataset, MANIFEST_FILE};
use autoeval::predictors::{predict_linear, PredictorSet};
use autoeval::stats::{rmse, DatasetStats};
use autoeval::{Error, Result};

const EXIT_THRESHOLD: u8 = 4;

#[derive(Parser)]
#[command(name = "autoeval", version, about = "Estimate classifier accuracy on unlabeled data")]
struct Cli {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the experiment RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Tab-separated output, one record per line.
    #[arg(long, global = true)]
    porcelain: bool,
    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the meta set and write its manifest.
    Synth,
    /// Train the classifier and compute its reference statistics.
    TrainClassifier,
    /// Fit the linear and neural predictors on the meta set.
    Fit,
    /// Estimate accuracy for exported feature bundles.
    Predict {
        /// Predictor checkpoint (default: <out-dir>/predictors.bin).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also print ground truth and absolute error for labeled bundles.
        #[arg(long)]
        with_truth: bool,
        #[arg(required = true)]
        bundles: Vec<PathBuf>,
    },
    /// Correlation study, method comparison and robustness suite.
    Eval,
    /// Meta-size and set-size ablations.
    Ablate,
    /// Print the default config as TOML.
    PrintDefaults,
}

struct Paths {
    root: PathBuf,
}

impl Paths {
    fn classifier(&self) -> PathBuf {
        self.root.join("classifier.bin")
    }
    fn reference(&self) -> PathBuf {
        self.root.join("reference_stats.bin")
    }
    fn meta(&self) -> PathBuf {
        self.root.join("meta")
    }
    fn predictors(&self) -> PathBuf {
        self.root.join("predictors.bin")
    }
    fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    fn bundles(&self) -> PathBuf {
        self.root.join("bundles")
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.rng_seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train_and_save(cfg: &ExperimentConfig, paths: &Paths) -> Result<(TinyClassifier, DatasetStats)> {
    std::fs::create_dir_all(&paths.root)?;
    let clf = train_reference_classifier(cfg)?;
    let stats = reference_stats(cfg, &clf)?;
    clf.save(&paths.classifier())?;
    std::fs::write(paths.reference(), stats.to_bytes()?)?;
    Ok((clf, stats))
}

/// Reuse a saved classifier when present, otherwise train one.
fn ensure_pipeline(cfg: &ExperimentConfig, paths: &Paths) -> Result<Pipeline> {
    // fail on a bad background corpus before spending time on training
    BackgroundCorpus::from_config(&cfg.backgrounds)?;
    let (clf, stats) = if paths.classifier().exists() && paths.reference().exists() {
        log::info!("reusing {}", paths.classifier().display());
        let clf = TinyClassifier::load(&paths.classifier())?;
        let stats = DatasetStats::from_bytes(&std::fs::read(paths.reference())?)?;
        (clf, stats)
    } else {
        train_and_save(cfg, paths)?
    };
    Pipeline::from_parts(cfg.clone(), clf, stats)
}

/// Reuse a manifest built by the same classifier and seed, otherwise rebuild.
fn ensure_meta(pipeline: &Pipeline, paths: &Paths) -> Result<MetaDataset> {
    let manifest = paths.meta().join(MANIFEST_FILE);
    if manifest.exists() {
        let meta = read_manifest(&manifest)?;
        let same = meta.provenance.rng_seed == pipeline.config.rng_seed
            && meta.provenance.classifier_hash == pipeline.classifier.checkpoint_hash()?
            && meta.provenance.seed_config.as_ref() == Some(&pipeline.config.seed)
            && meta.len() == pipeline.config.meta_size;
        if same {
            log::info!("reusing {}", manifest.display());
            return Ok(meta);
        }
        log::info!("manifest is stale, rebuilding");
    }
    let meta = pipeline.build_meta()?;
    write_manifest(&meta, &paths.meta())?;
    Ok(meta)
}

fn report_meta(title: &str, pipeline: &Pipeline, meta: &MetaDataset) -> Result<ReportMeta> {
    Ok(ReportMeta {
        title: title.into(),
        rng_seed: pipeline.config.rng_seed,
        config_hash: pipeline.config.hash()?,
        classifier_hash: pipeline.classifier.checkpoint_hash()?,
        manifest_hash: manifest_hash(meta)?,
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

fn write_config(cfg: &ExperimentConfig, paths: &Paths) -> Result<()> {
    std::fs::create_dir_all(&paths.root)?;
    std::fs::write(paths.root.join("config.toml"), cfg.to_toml()?)?;
    Ok(())
}

fn cmd_synth(cfg: &ExperimentConfig, paths: &Paths, porcelain: bool) -> Result<u8> {
    write_config(cfg, paths)?;
    let pipeline = ensure_pipeline(cfg, paths)?;
    let meta = pipeline.build_meta()?;
    let path = write_manifest(&meta, &paths.meta())?;
    let hash = manifest_hash(&meta)?;
    if porcelain {
        println!("manifest\t{}\t{}\t{}", path.display(), meta.len(), hash);
    } else {
        println!("wrote {} records to {}", meta.len(), path.display());
        println!("manifest hash {hash}");
    }
    Ok(0)
}

fn cmd_train(cfg: &ExperimentConfig, paths: &Paths, porcelain: bool) -> Result<u8> {
    write_config(cfg, paths)?;
    let (clf, stats) = train_and_save(cfg, paths)?;
    let hash = clf.checkpoint_hash()?;
    let pipeline = Pipeline::from_parts(cfg.clone(), clf, stats)?;
    if porcelain {
        println!("classifier\t{}\t{}\t{}", paths.classifier().display(), hash, pipeline.seed_accuracy);
    } else {
        println!("wrote {}", paths.classifier().display());
        println!("checkpoint hash {hash}");
        println!("clean seed accuracy {:.4}", pipeline.seed_accuracy);
    }
    Ok(0)
}

fn fit_and_save(pipeline: &Pipeline, meta: &MetaDataset, paths: &Paths) -> Result<PredictorSet> {
    let cfg = &pipeline.config;
    let set = fit_predictors(meta, &pipeline.ori_stats, &cfg.neural, cfg.neural_seed)?;
    set.save(&paths.predictors())?;
    Ok(set)
}

fn cmd_fit(cfg: &ExperimentConfig, paths: &Paths, porcelain: bool) -> Result<u8> {
    write_config(cfg, paths)?;
    let pipeline = ensure_pipeline(cfg, paths)?;
    let meta = ensure_meta(&pipeline, paths)?;
    let set = fit_and_save(&pipeline, &meta, paths)?;
    let truth: Vec<f64> = meta.val_records().map(|r| r.accuracy).collect();
    let lin: Vec<f64> = meta.val_records().map(|r| predict_linear(&set.linear, r.fd)).collect();
    let neu = meta
        .val_records()
        .map(|r| set.neural.predict(&autoeval::predictors::DatasetRepresentation::from_stats(r.fd, &r.stats)?))
        .collect::<Result<Vec<_>>>()?;
    let (l, n) = (rmse(&lin, &truth)?, rmse(&neu, &truth)?);
    if porcelain {
        println!("{LINEAR}\t{}\t{}\t{l}", set.linear.w0, set.linear.w1);
        println!("{NEURAL}\t{}\t{n}", set.neural.input_dim());
    } else {
        println!("wrote {}", paths.predictors().display());
        println!("linear: w0 {:.6}, w1 {:.6e}, validation rmse {l:.4}", set.linear.w0, set.linear.w1);
        println!("neural: input dim {}, validation rmse {n:.4}", set.neural.input_dim());
    }
    Ok(0)
}

fn cmd_predict(
    cfg: &ExperimentConfig,
    paths: &Paths,
    checkpoint: Option<&Path>,
    with_truth: bool,
    bundles: &[PathBuf],
    porcelain: bool,
) -> Result<u8> {
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| paths.predictors());
    let set = PredictorSet::load(&ckpt)?;
    let methods = method_names(&cfg.taus);
    for path in bundles {
        let bundle = import_feature_bundle(path)?;
        let preds = predict_bundle(&set, &cfg.taus, &bundle)?;
        let truth = if with_truth {
            match bundle.labels() {
                Some(_) => Some(bundle.accuracy()?),
                None => {
                    log::warn!("{} has no labels; printing estimates only", path.display());
                    None
                }
            }
        } else {
            None
        };
        for (m, p) in methods.iter().zip(&preds) {
            match (porcelain, truth) {
                (true, Some(t)) => println!("{}\t{m}\t{p}\t{t}\t{}", bundle.source_id(), (p - t).abs()),
                (true, None) => println!("{}\t{m}\t{p}", bundle.source_id()),
                (false, Some(t)) => println!(
                    "{:<16} {m:<16} estimate {p:.4}  truth {t:.4}  abs error {:.4}",
                    bundle.source_id(),
                    (p - t).abs()
                ),
                (false, None) => println!("{:<16} {m:<16} estimate {p:.4}", bundle.source_id()),
            }
        }
    }
    Ok(0)
}

fn cmd_eval(cfg: &ExperimentConfig, paths: &Paths, porcelain: bool) -> Result<u8> {
    write_config(cfg, paths)?;
    let pipeline = ensure_pipeline(cfg, paths)?;
    let meta = ensure_meta(&pipeline, paths)?;
    let reports = paths.reports();
    std::fs::create_dir_all(&reports)?;

    let (rho, points) = run_correlation_study(&meta)?;
    std::fs::write(reports.join("scatter.txt"), scatter_text(&points))?;

    let set = fit_and_save(&pipeline, &meta, paths)?;
    let tests = pipeline.test_bundles(cfg.test_sets)?;
    std::fs::create_dir_all(paths.bundles())?;
    for b in &tests {
        b.export(&paths.bundles().join(format!("{}.aefb", b.source_id())))?;
    }
    let comparison = run_method_comparison(
        &set,
        &cfg.taus,
        &tests,
        report_meta("method comparison on held-out synthetic sets", &pipeline, &meta)?,
    )?
    .with_correlation(rho, &points);
    let comparison_hash = comparison.write(&reports, "comparison")?;

    let robustness = run_robustness_suite(
        &pipeline,
        &set,
        report_meta("robustness to held-out transforms", &pipeline, &meta)?,
    )?;
    let robustness_hash = robustness.report.write(&reports, "robustness")?;
    let recipes: Vec<String> = robustness
        .recipes
        .iter()
        .zip(&robustness.report.rows)
        .map(|(r, row)| serde_json::json!({"name": row.name, "recipe": r}).to_string())
        .collect();
    std::fs::write(reports.join("robustness_recipes.jsonl"), recipes.join("\n") + "\n")?;

    let violations = check_thresholds(&cfg.thresholds, Some(rho), Some(&comparison), Some(&robustness), None);
    if porcelain {
        println!("rho\t{rho}");
        for s in &comparison.summary {
            println!("rmse\t{}\t{}", s.method, s.rmse.map_or("NA".into(), |v| v.to_string()));
        }
        println!("robustness_within_0.15\t{}", robustness.neural_within(0.15));
        println!("report\tcomparison\t{comparison_hash}");
        println!("report\trobustness\t{robustness_hash}");
    } else {
        print!("{}", comparison.to_table());
        println!();
        print!("{}", robustness.report.to_table());
        println!(
            "clean seed accuracy {:.2}%; neural within 15 points on {:.0}% of robustness sets",
            100.0 * robustness.seed_accuracy,
            100.0 * robustness.neural_within(0.15)
        );
        println!("reports written to {}", reports.display());
    }
    finish(violations)
}

fn cmd_ablate(cfg: &ExperimentConfig, paths: &Paths, porcelain: bool) -> Result<u8> {
    write_config(cfg, paths)?;
    let pipeline = ensure_pipeline(cfg, paths)?;
    let meta = ensure_meta(&pipeline, paths)?;
    let tests = pipeline.test_bundles(cfg.test_sets)?;
    let table = run_size_ablation(&pipeline, &meta, &tests)?;
    let reports = paths.reports();
    std::fs::create_dir_all(&reports)?;
    let jsonl = table.to_jsonl()?;
    std::fs::write(reports.join("ablation.jsonl"), &jsonl)?;
    std::fs::write(reports.join("ablation.txt"), table.to_table())?;
    if porcelain {
        for r in &table.rows {
            println!("{}\t{}\t{}\t{}", r.axis, r.value, r.linear_rmse, r.neural_rmse);
        }
        println!("report\tablation\t{}", hex_digest(jsonl.as_bytes()));
    } else {
        print!("{}", table.to_table());
    }
    finish(check_thresholds(&cfg.thresholds, None, None, None, Some(&table)))
}

fn finish(violations: Vec<String>) -> Result<u8> {
    if violations.is_empty() {
        return Ok(0);
    }
    for v in &violations {
        eprintln!("threshold violated: {v}");
    }
    Ok(EXIT_THRESHOLD)
}

fn run(cli: &Cli) -> Result<u8> {
    if let Command::PrintDefaults = cli.command {
        print!("{}", ExperimentConfig::default().to_toml()?);
        return Ok(0);
    }
    let cfg = load_config(cli)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let paths = Paths {
        root: cfg.out_dir.clone(),
    };
    match &cli.command {
        Command::Synth => cmd_synth(&cfg, &paths, cli.porcelain),
        Command::TrainClassifier => cmd_train(&cfg, &paths, cli.porcelain),
        Command::Fit => cmd_fit(&cfg, &paths, cli.porcelain),
        Command::Predict {
            checkpoint,
            with_truth,
            bundles,
        } => cmd_predict(&cfg, &paths, checkpoint.as_deref(), *with_truth, bundles, cli.porcelain),
        Command::Eval => cmd_eval(&cfg, &paths, cli.porcelain),
        Command::Ablate => cmd_ablate(&cfg, &paths, cli.porcelain),
        Command::PrintDefaults => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
