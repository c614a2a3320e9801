//! Subcommand implementations. Each writes its outputs under the
//! configured output directory and returns a summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ngram_lr::corpus::{generate, parse_annotated, to_annotated, Document, SyntheticConfig};
use ngram_lr::counts::{build_model_parallel, EntityTypeFilter, FrequencyModel};
use ngram_lr::estimators::{EstimatorConfig, EstimatorKind};
use ngram_lr::evaluation::{
    precision_recall, rank_recall, tune, tune_kn, EvaluationSet, KnTuneOutcome, RankedList,
    TuneOutcome, TuningGrid, DISCOUNT_GRID,
};
use ngram_lr::scenarios::title_contexts;
use ngram_lr::sweeps::{
    sweep_k, sweep_ours_lambda_d, sweep_ours_lambda_item, Sweep, FIXED_LAMBDA_D, FIXED_LAMBDA_ITEM,
};
use sha2::{Digest, Sha256};

use crate::config::{join, usage, RunConfig};
use crate::svg::{Plot, Series};

pub const MODEL_FILE: &str = "model.tsv";
pub const TUNED_FILE: &str = "tuned.conf";

/// Runs `f` on a pool of `threads` workers (0 = rayon's default pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("cannot start worker threads")?;
    Ok(pool.install(f))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    let text = read_file(path)?;
    parse_annotated(&text).with_context(|| format!("malformed corpus {}", path.display()))
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf> {
    path.as_ref()
        .ok_or_else(|| usage(format!("missing --{flag} (or `{flag} = …` in the config)")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn filter(config: &RunConfig) -> Result<EntityTypeFilter> {
    EntityTypeFilter::new(&config.label).map_err(|e| usage(e.message))
}

fn build_from_train(config: &RunConfig) -> Result<FrequencyModel> {
    let train = require(&config.train, "train")?;
    let docs = read_corpus(train)?;
    let shards = rayon::current_num_threads().max(1);
    Ok(build_model_parallel(
        &docs,
        config.order,
        &filter(config)?,
        shards,
    )?)
}

/// The cached model if `--model` is given, otherwise counts `--train`.
pub fn load_model(config: &RunConfig) -> Result<FrequencyModel> {
    let model = match &config.model {
        Some(path) => {
            let text = read_file(path)?;
            FrequencyModel::from_text(&text)
                .with_context(|| format!("malformed model {}", path.display()))?
        }
        None => build_from_train(config)?,
    };
    if model.order() != config.order || model.label() != config.label {
        anyhow::bail!(
            "model has order {} and label {}, but order {} and label {} were requested",
            model.order(),
            model.label(),
            config.order,
            config.label
        );
    }
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct CountSummary {
    pub path: PathBuf,
    pub n_de: u64,
    pub n_nu: u64,
}

/// Counts the training corpus and caches the model.
pub fn cmd_count(config: &RunConfig) -> Result<CountSummary> {
    with_threads(config.threads, || {
        let model = build_from_train(config)?;
        let path = match &config.model {
            Some(p) => p.clone(),
            None => {
                ensure_dir(&config.out)?;
                config.out.join(MODEL_FILE)
            }
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_file(&path, &model.to_text())?;
        Ok(CountSummary {
            path,
            n_de: model.n_de(),
            n_nu: model.n_nu(),
        })
    })?
}

/// `config.estimator`, with KN discounts tuned on the model if missing.
fn resolved_estimator(config: &RunConfig, model: &FrequencyModel) -> Result<EstimatorConfig> {
    let mut estimator = config.estimator.clone();
    if estimator.kind == EstimatorKind::Kn && estimator.kn_discounts.is_none() {
        estimator.kn_discounts = Some(tune_kn(model, &DISCOUNT_GRID)?.discounts);
    }
    Ok(estimator)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn ranked_csv(ranked: &RankedList) -> String {
    let mut out = String::from("rank,ngram,estimate,r_item,t_d,truth\n");
    for (i, e) in ranked.entries.iter().enumerate() {
        let (r_item, t_d) = match e.estimate.parts {
            Some(p) => (format!("{:e}", p.r_item), format!("{:e}", p.t_d)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i + 1,
            csv_field(&e.ngram.to_string()),
            e.estimate.value,
            r_item,
            t_d,
            u8::from(e.truth)
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct RankSummary {
    pub dir: PathBuf,
    pub estimator: EstimatorConfig,
    pub candidates: usize,
    pub relevant: usize,
    pub auc: f64,
    pub final_recall: f64,
    pub ranked: RankedList,
}

/// Ranks the test candidates and writes the report bundle.
pub fn cmd_rank(config: &RunConfig) -> Result<RankSummary> {
    with_threads(config.threads, || rank_inner(config))?
}

fn rank_inner(config: &RunConfig) -> Result<RankSummary> {
    let test_path = require(&config.test, "test")?;
    let test_docs = read_corpus(test_path)?;
    let model = load_model(config)?;
    let estimator = resolved_estimator(config, &model)?;
    let set = EvaluationSet::new(
        &test_docs,
        &filter(config)?,
        config.order,
        config.cutoff,
        config.truth_min_count,
    );
    let ranked = set.rank(&model, &estimator)?;
    let rr = rank_recall(&ranked, &set.relevant).context("cannot evaluate the test split")?;
    let pr = precision_recall(&ranked, &set.relevant)?;

    ensure_dir(&config.out)?;
    let mut files: Vec<(&str, String)> = vec![
        ("ranked.csv", ranked_csv(&ranked)),
        ("rank_recall.csv", rr.to_csv()),
        ("precision_recall.csv", pr.to_csv()),
        ("pr_markers.csv", pr.markers_csv()),
    ];
    if config.svg {
        let xy = |f: fn(&ngram_lr::evaluation::CurvePoint) -> (f64, f64)| {
            rr.points.iter().map(f).collect()
        };
        files.push((
            "rank_recall.svg",
            Plot {
                title: format!("{} rank-recall", estimator.kind),
                x_label: "rank".into(),
                y_label: "recall".into(),
                log_x: false,
                series: vec![Series {
                    name: estimator.kind.to_string(),
                    points: xy(|p| (p.rank as f64, p.recall)),
                }],
            }
            .render(),
        ));
        files.push((
            "precision_recall.svg",
            Plot {
                title: format!("{} precision-recall", estimator.kind),
                x_label: "recall".into(),
                y_label: "precision".into(),
                log_x: false,
                series: vec![Series {
                    name: estimator.kind.to_string(),
                    points: xy(|p| (p.recall, p.precision)),
                }],
            }
            .render(),
        ));
    }

    let mut effective = config.clone();
    effective.estimator = estimator.clone();
    let mut manifest = String::from("# ngram-lr rank report\n");
    manifest.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in effective.echo() {
        manifest.push_str(&format!("config.{k}={v}\n"));
    }
    let mut inputs = vec![("test", test_path)];
    match (&config.model, &config.train) {
        (Some(m), _) => inputs.push(("model", m)),
        (None, Some(t)) => inputs.push(("train", t)),
        (None, None) => {}
    }
    for (role, path) in inputs {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        manifest.push_str(&format!("input.{role}.sha256={}\n", sha256_hex(&bytes)));
    }
    manifest.push_str(&format!("candidates={}\n", set.candidates.len()));
    manifest.push_str(&format!("relevant={}\n", set.relevant.len()));
    manifest.push_str(&format!("ranked={}\n", ranked.entries.len()));
    manifest.push_str(&format!("auc={}\n", rr.auc));
    manifest.push_str(&format!("final_recall={}\n", rr.final_recall()));
    for (name, contents) in &files {
        manifest.push_str(&format!(
            "output.{name}.sha256={}\n",
            sha256_hex(contents.as_bytes())
        ));
        write_file(&config.out.join(name), contents)?;
    }
    write_file(&config.out.join("manifest.txt"), &manifest)?;

    Ok(RankSummary {
        dir: config.out.clone(),
        estimator,
        candidates: set.candidates.len(),
        relevant: set.relevant.len(),
        auc: rr.auc,
        final_recall: rr.final_recall(),
        ranked,
    })
}

/// `key = value` lines reproducing an estimator configuration.
pub fn estimator_conf(estimator: &EstimatorConfig) -> String {
    let mut out = format!("estimator = {}\n", estimator.kind);
    match estimator.kind {
        EstimatorKind::B => {}
        EstimatorKind::K => out.push_str(&format!("lambda = {}\n", estimator.lambda)),
        EstimatorKind::Item => out.push_str(&format!("lambda_item = {}\n", estimator.lambda_item)),
        EstimatorKind::Ours => out.push_str(&format!(
            "lambda_item = {}\nlambda_d = {}\n",
            estimator.lambda_item, estimator.lambda_d
        )),
        EstimatorKind::Kn => {
            if let Some(d) = &estimator.kn_discounts {
                out.push_str(&format!(
                    "kn_discounts_de = {}\nkn_discounts_nu = {}\n",
                    join(&d.de),
                    join(&d.nu)
                ));
            }
        }
    }
    out
}

/// Grid-searches the estimator's parameters on the validation split.
pub fn cmd_tune(config: &RunConfig) -> Result<TuneOutcome> {
    with_threads(config.threads, || {
        match config.estimator.kind {
            EstimatorKind::B => return Err(usage("B has no parameters to tune")),
            EstimatorKind::Kn => return Err(usage("KN discounts are tuned with `tune-kn`")),
            _ => {}
        }
        let valid_path = require(&config.valid, "valid")?;
        let valid_docs = read_corpus(valid_path)?;
        let model = load_model(config)?;
        let set = EvaluationSet::new(
            &valid_docs,
            &filter(config)?,
            config.order,
            config.cutoff,
            config.truth_min_count,
        );
        let outcome = tune(&model, &set, &config.estimator, &TuningGrid::default())
            .context("tuning failed")?;

        ensure_dir(&config.out)?;
        let mut trace = String::new();
        match config.estimator.kind {
            EstimatorKind::K => {
                trace.push_str("lambda,auc\n");
                for p in &outcome.trace {
                    trace.push_str(&format!("{:e},{}\n", p.config.lambda, p.auc));
                }
            }
            EstimatorKind::Item => {
                trace.push_str("lambda_item,auc\n");
                for p in &outcome.trace {
                    trace.push_str(&format!("{:e},{}\n", p.config.lambda_item, p.auc));
                }
            }
            _ => {
                trace.push_str("lambda_item,lambda_d,auc\n");
                for p in &outcome.trace {
                    trace.push_str(&format!(
                        "{:e},{:e},{}\n",
                        p.config.lambda_item, p.config.lambda_d, p.auc
                    ));
                }
            }
        }
        write_file(&config.out.join("tune_trace.csv"), &trace)?;
        let conf = format!(
            "# validation auc = {}\n{}",
            outcome.best_auc,
            estimator_conf(&outcome.best)
        );
        write_file(&config.out.join(TUNED_FILE), &conf)?;
        Ok(outcome)
    })?
}

/// Picks the KN discounts by training likelihood.
pub fn cmd_tune_kn(config: &RunConfig) -> Result<KnTuneOutcome> {
    with_threads(config.threads, || {
        let model = load_model(config)?;
        let outcome = tune_kn(&model, &DISCOUNT_GRID)?;
        ensure_dir(&config.out)?;
        let mut trace = String::from("side,position,discount,log_likelihood\n");
        for p in &outcome.trace {
            trace.push_str(&format!(
                "{},{},{},{}\n",
                p.side, p.position, p.discount, p.log_likelihood
            ));
        }
        write_file(&config.out.join("kn_trace.csv"), &trace)?;
        let tuned = EstimatorConfig::kn(outcome.discounts.clone());
        write_file(&config.out.join(TUNED_FILE), &estimator_conf(&tuned))?;
        Ok(outcome)
    })?
}

/// The synthetic corpus settings: planted contexts from the config, or
/// the built-in title/verb scenario.
pub fn synthetic_config(config: &RunConfig) -> Result<SyntheticConfig> {
    if config.planted.is_empty() && config.distractors.is_empty() {
        return Ok(title_contexts(config.seed, config.docs, config.vocab_size)?);
    }
    let mut synthetic = SyntheticConfig::new(
        config.seed,
        config.vocab_size,
        config.docs,
        config.planted.clone(),
    );
    if !config.distractors.is_empty() {
        synthetic.distractors = config.distractors.clone();
        synthetic.distractor_prob = synthetic.plant_prob;
    }
    Ok(synthetic)
}

/// Writes `train.txt`, `valid.txt` and `test.txt`.
pub fn cmd_generate(config: &RunConfig) -> Result<[PathBuf; 3]> {
    let splits = generate(&synthetic_config(config)?)?;
    ensure_dir(&config.out)?;
    let paths = ["train.txt", "valid.txt", "test.txt"].map(|n| config.out.join(n));
    for (path, docs) in paths
        .iter()
        .zip([&splits.train, &splits.valid, &splits.test])
    {
        write_file(path, &to_annotated(docs))?;
    }
    Ok(paths)
}

fn sweep_plot(sweep: &Sweep, title: &str) -> String {
    Plot {
        title: title.into(),
        x_label: sweep.parameter.into(),
        y_label: "estimate".into(),
        log_x: true,
        series: sweep
            .names
            .iter()
            .enumerate()
            .map(|(j, name)| Series {
                name: name.to_string(),
                points: sweep.grid.iter().copied().zip(sweep.series(j)).collect(),
            })
            .collect(),
    }
    .render()
}

/// Writes the regularization sweeps over the built-in examples.
pub fn cmd_reproduce_figures(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let sweeps = [
        ("sweep_k_lambda", sweep_k()?, "K across lambda".to_string()),
        (
            "sweep_ours_lambda_item",
            sweep_ours_lambda_item(FIXED_LAMBDA_D)?,
            format!("OURS across lambda_item (lambda_d = {FIXED_LAMBDA_D:e})"),
        ),
        (
            "sweep_ours_lambda_d",
            sweep_ours_lambda_d(FIXED_LAMBDA_ITEM)?,
            format!("OURS across lambda_d (lambda_item = {FIXED_LAMBDA_ITEM:e})"),
        ),
    ];
    ensure_dir(&config.out)?;
    let mut written = Vec::new();
    for (stem, sweep, title) in &sweeps {
        let csv = config.out.join(format!("{stem}.csv"));
        write_file(&csv, &sweep.to_csv())?;
        written.push(csv);
        if config.svg {
            let svg = config.out.join(format!("{stem}.svg"));
            write_file(&svg, &sweep_plot(sweep, title))?;
            written.push(svg);
        }
    }
    Ok(written)
}
