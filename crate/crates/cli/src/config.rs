//! Run configuration: a flat `key = value` file overridden by flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use ngram_lr::corpus::{Distractor, PlantedContext, SplitMask};
use ngram_lr::estimators::{EstimatorConfig, EstimatorKind, KnDiscounts};
use ngram_lr::evaluation::DEFAULT_CUTOFF;

/// Bad flags, config keys or values; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// N-gram order
    #[arg(long)]
    pub order: Option<usize>,
    /// Entity label whose left contexts form the numerator sample
    #[arg(long)]
    pub label: Option<String>,
    /// B, K, KN, ITEM or OURS
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "lambda-item")]
    pub lambda_item: Option<f64>,
    #[arg(long = "lambda-d")]
    pub lambda_d: Option<f64>,
    /// Comma-separated KN discounts of the denominator, one per position
    #[arg(long = "kn-discounts-de")]
    pub kn_discounts_de: Option<String>,
    /// Comma-separated KN discounts of the numerator, one per position
    #[arg(long = "kn-discounts-nu")]
    pub kn_discounts_nu: Option<String>,
    /// Number of ranks evaluated
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Minimum test occurrences left of an entity for a true label (1 or 2)
    #[arg(long = "truth-min-count")]
    pub truth_min_count: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training corpus (annotated text)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Validation corpus (annotated text)
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Test corpus (annotated text)
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Cached frequency model
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Worker threads for counting and scoring (0 = all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write SVG line plots
    #[arg(long)]
    pub svg: bool,
    /// Synthetic corpus: background vocabulary size
    #[arg(long = "vocab-size")]
    pub vocab_size: Option<usize>,
    /// Synthetic corpus: number of documents
    #[arg(long)]
    pub docs: Option<usize>,
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub order: usize,
    pub label: String,
    pub estimator: EstimatorConfig,
    pub cutoff: usize,
    pub truth_min_count: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub threads: usize,
    pub svg: bool,
    pub vocab_size: usize,
    pub docs: usize,
    pub planted: Vec<PlantedContext>,
    pub distractors: Vec<Distractor>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            order: 2,
            label: "PER".into(),
            estimator: EstimatorConfig {
                lambda: 1e-5,
                lambda_item: 1e-4,
                lambda_d: 1e-5,
                ..EstimatorConfig::new(EstimatorKind::Ours)
            },
            cutoff: DEFAULT_CUTOFF,
            truth_min_count: 1,
            seed: 1,
            out: PathBuf::from("out"),
            train: None,
            valid: None,
            test: None,
            model: None,
            threads: 0,
            svg: false,
            vocab_size: 3000,
            docs: 600,
            planted: Vec::new(),
            distractors: Vec::new(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| usage(format!("invalid value {value:?} for {key}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_value::<f64>(key, v.trim()))
        .collect()
}

fn parse_splits(value: &str) -> Result<SplitMask> {
    let mut mask = SplitMask {
        train: false,
        valid: false,
        test: false,
    };
    for part in value.split(',') {
        match part.trim() {
            "train" => mask.train = true,
            "valid" => mask.valid = true,
            "test" => mask.test = true,
            other => return Err(usage(format!("unknown split {other:?}"))),
        }
    }
    Ok(mask)
}

/// `tokens ; LABEL ; rate [; splits]`
fn parse_plant(value: &str) -> Result<PlantedContext> {
    let fields: Vec<&str> = value.split(';').map(str::trim).collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(usage(format!(
            "plant must be `tokens ; LABEL ; rate [; splits]`, got {value:?}"
        )));
    }
    let tokens: Vec<&str> = fields[0].split_whitespace().collect();
    let rate = parse_value::<f64>("plant rate", fields[2])?;
    let mut plant = PlantedContext::new(&tokens, fields[1], rate).map_err(|e| usage(e.message))?;
    if let Some(splits) = fields.get(3) {
        plant = plant.in_splits(parse_splits(splits)?);
    }
    Ok(plant)
}

/// `tokens [; splits]`
fn parse_distractor(value: &str) -> Result<Distractor> {
    let (tokens, splits) = match value.split_once(';') {
        Some((t, s)) => (t, Some(s)),
        None => (value, None),
    };
    let tokens: Vec<&str> = tokens.split_whitespace().collect();
    let mut d = Distractor::new(&tokens).map_err(|e| usage(e.message))?;
    if let Some(s) = splits {
        d = d.in_splits(parse_splits(s)?);
    }
    Ok(d)
}

impl RunConfig {
    /// Reads `key = value` lines; `#` starts a comment line.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    idx + 1
                ))
            })?;
            self.set(key.trim(), value.trim(), base)
                .with_context(|| format!("{}:{}", path.display(), idx + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "order" => self.order = parse_value(key, value)?,
            "label" => self.label = value.to_string(),
            "estimator" => {
                self.estimator.kind = value
                    .parse::<EstimatorKind>()
                    .map_err(|e| usage(e.message))?
            }
            "lambda" => self.estimator.lambda = parse_value(key, value)?,
            "lambda_item" => self.estimator.lambda_item = parse_value(key, value)?,
            "lambda_item_per_position" => {
                self.estimator.lambda_item_per_position = Some(parse_list(key, value)?)
            }
            "lambda_d" => self.estimator.lambda_d = parse_value(key, value)?,
            "kn_discounts_de" => self.discounts_mut().de = parse_list(key, value)?,
            "kn_discounts_nu" => self.discounts_mut().nu = parse_list(key, value)?,
            "cutoff" => self.cutoff = parse_value(key, value)?,
            "truth_min_count" => self.truth_min_count = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "out" => self.out = path(value),
            "train" => self.train = Some(path(value)),
            "valid" => self.valid = Some(path(value)),
            "test" => self.test = Some(path(value)),
            "model" => self.model = Some(path(value)),
            "threads" => self.threads = parse_value(key, value)?,
            "svg" => self.svg = parse_value(key, value)?,
            "vocab_size" => self.vocab_size = parse_value(key, value)?,
            "docs" => self.docs = parse_value(key, value)?,
            "plant" => self.planted.push(parse_plant(value)?),
            "distractor" => self.distractors.push(parse_distractor(value)?),
            _ => return Err(usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    fn discounts_mut(&mut self) -> &mut KnDiscounts {
        self.estimator
            .kn_discounts
            .get_or_insert_with(|| KnDiscounts {
                de: Vec::new(),
                nu: Vec::new(),
            })
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(args: &RunArgs) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &args.config {
            config.apply_file(path)?;
        }
        let cwd = Path::new("");
        macro_rules! flag {
            ($field:ident, $key:literal) => {
                if let Some(v) = &args.$field {
                    config.set($key, &v.to_string(), cwd)?;
                }
            };
        }
        flag!(order, "order");
        flag!(label, "label");
        flag!(estimator, "estimator");
        flag!(lambda, "lambda");
        flag!(lambda_item, "lambda_item");
        flag!(lambda_d, "lambda_d");
        flag!(kn_discounts_de, "kn_discounts_de");
        flag!(kn_discounts_nu, "kn_discounts_nu");
        flag!(cutoff, "cutoff");
        flag!(truth_min_count, "truth_min_count");
        flag!(seed, "seed");
        flag!(threads, "threads");
        flag!(vocab_size, "vocab_size");
        flag!(docs, "docs");
        if let Some(out) = &args.out {
            config.out = out.clone();
        }
        if args.train.is_some() {
            config.train = args.train.clone();
        }
        if args.valid.is_some() {
            config.valid = args.valid.clone();
        }
        if args.test.is_some() {
            config.test = args.test.clone();
        }
        if args.model.is_some() {
            config.model = args.model.clone();
        }
        config.svg |= args.svg;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(usage("order must be at least 1"));
        }
        if self.cutoff == 0 {
            return Err(usage("cutoff must be at least 1"));
        }
        if !(1..=2).contains(&self.truth_min_count) {
            return Err(usage("truth_min_count must be 1 or 2"));
        }
        if self.label.is_empty() || self.label.chars().any(char::is_whitespace) {
            return Err(usage(format!("invalid label {:?}", self.label)));
        }
        if let Err(e) = self.estimator.validate(self.order) {
            // KN without discounts gets them from tune-kn at run time
            let untuned_kn =
                self.estimator.kind == EstimatorKind::Kn && self.estimator.kn_discounts.is_none();
            if !untuned_kn {
                return Err(usage(e.to_string()));
            }
        }
        Ok(())
    }

    /// Settings that determine a run's outputs, as sorted `key=value` lines.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        m.insert("order", self.order.to_string());
        m.insert("label", self.label.clone());
        m.insert("estimator", self.estimator.kind.to_string());
        m.insert("lambda", self.estimator.lambda.to_string());
        m.insert("lambda_item", self.estimator.lambda_item.to_string());
        if let Some(per) = &self.estimator.lambda_item_per_position {
            m.insert("lambda_item_per_position", join(per));
        }
        m.insert("lambda_d", self.estimator.lambda_d.to_string());
        if let Some(d) = &self.estimator.kn_discounts {
            m.insert("kn_discounts_de", join(&d.de));
            m.insert("kn_discounts_nu", join(&d.nu));
        }
        m.insert("cutoff", self.cutoff.to_string());
        m.insert("truth_min_count", self.truth_min_count.to_string());
        m.insert("seed", self.seed.to_string());
        m
    }
}

pub fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}
