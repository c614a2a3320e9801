//! Annotated documents, the two-column BIO text format, and a seeded
//! synthetic corpus generator.

use std::collections::BTreeSet;
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ArgumentError, ParseError};

/// A single item of a token stream (a word or a letter).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Result<Self, ArgumentError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(ArgumentError::new("token must be non-empty"));
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(ArgumentError::new(format!(
                "token {surface:?} contains whitespace"
            )));
        }
        Ok(Token(surface))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Half-open token range `[start, end)` carrying an entity type tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

/// A flat token sequence with sorted, non-overlapping entity spans.
///
/// Sentence boundaries are not modeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    tokens: Vec<Token>,
    spans: Vec<EntitySpan>,
}

impl Document {
    pub fn new(tokens: Vec<Token>, spans: Vec<EntitySpan>) -> Result<Self, ArgumentError> {
        let mut prev_end = 0;
        for span in &spans {
            if span.label.is_empty() || span.label.chars().any(char::is_whitespace) {
                return Err(ArgumentError::new(format!(
                    "invalid span label {:?}",
                    span.label
                )));
            }
            if span.start >= span.end || span.end > tokens.len() {
                return Err(ArgumentError::new(format!(
                    "span [{}, {}) out of range for {} tokens",
                    span.start,
                    span.end,
                    tokens.len()
                )));
            }
            if span.start < prev_end {
                return Err(ArgumentError::new(format!(
                    "span [{}, {}) overlaps or is out of order",
                    span.start, span.end
                )));
            }
            prev_end = span.end;
        }
        Ok(Document { tokens, spans })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn spans(&self) -> &[EntitySpan] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// BIO tag for every token, in order.
    pub fn tags(&self) -> Vec<String> {
        let mut tags = vec!["O".to_string(); self.tokens.len()];
        for span in &self.spans {
            tags[span.start] = format!("B-{}", span.label);
            for tag in &mut tags[span.start + 1..span.end] {
                *tag = format!("I-{}", span.label);
            }
        }
        tags
    }
}

/// Train / validation / test partition of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSet {
    pub train: Vec<Document>,
    pub valid: Vec<Document>,
    pub test: Vec<Document>,
}

/// Parses `token<TAB>tag` lines; blank lines separate documents.
///
/// Runs of blank lines are treated as a single separator. Line numbers in
/// errors are 1-based.
pub fn parse_annotated(text: &str) -> Result<Vec<Document>, ParseError> {
    let mut docs = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut spans: Vec<EntitySpan> = Vec::new();
    let mut open: Option<(usize, String)> = None;

    fn close(open: &mut Option<(usize, String)>, end: usize, spans: &mut Vec<EntitySpan>) {
        if let Some((start, label)) = open.take() {
            spans.push(EntitySpan { start, end, label });
        }
    }

    let mut flush = |tokens: &mut Vec<Token>,
                     spans: &mut Vec<EntitySpan>,
                     open: &mut Option<(usize, String)>,
                     line: usize|
     -> Result<(), ParseError> {
        if tokens.is_empty() {
            return Ok(());
        }
        close(open, tokens.len(), spans);
        let doc = Document::new(std::mem::take(tokens), std::mem::take(spans))
            .map_err(|e| ParseError::new(line, e.to_string()))?;
        docs.push(doc);
        Ok(())
    };

    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut spans, &mut open, lineno)?;
            continue;
        }
        let (surface, tag) = line
            .split_once('\t')
            .ok_or_else(|| ParseError::new(lineno, "expected `token<TAB>tag`"))?;
        if tag.contains('\t') {
            return Err(ParseError::new(lineno, "more than two columns"));
        }
        let token = Token::new(surface).map_err(|e| ParseError::new(lineno, e.to_string()))?;
        let pos = tokens.len();
        if tag == "O" {
            close(&mut open, pos, &mut spans);
        } else if let Some(label) = tag.strip_prefix("B-") {
            if label.is_empty() {
                return Err(ParseError::new(lineno, "empty entity label"));
            }
            close(&mut open, pos, &mut spans);
            open = Some((pos, label.to_string()));
        } else if let Some(label) = tag.strip_prefix("I-") {
            match &open {
                Some((_, current)) if current == label => {}
                _ => {
                    return Err(ParseError::new(
                        lineno,
                        format!("tag {tag} does not continue a {label} entity"),
                    ))
                }
            }
        } else {
            return Err(ParseError::new(lineno, format!("unknown tag {tag:?}")));
        }
        tokens.push(token);
    }
    flush(&mut tokens, &mut spans, &mut open, last_line)?;
    Ok(docs)
}

/// Writes documents in the format read by [`parse_annotated`].
pub fn to_annotated(docs: &[Document]) -> String {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for (token, tag) in doc.tokens.iter().zip(doc.tags()) {
            out.push_str(token.as_str());
            out.push('\t');
            out.push_str(&tag);
            out.push('\n');
        }
    }
    out
}

/// Which of the three splits a planted pattern may appear in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMask {
    pub train: bool,
    pub valid: bool,
    pub test: bool,
}

impl SplitMask {
    pub const ALL: SplitMask = SplitMask {
        train: true,
        valid: true,
        test: true,
    };
    pub const HELD_OUT: SplitMask = SplitMask {
        train: false,
        valid: true,
        test: true,
    };

    fn allows(&self, split: Split) -> bool {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Split {
    Train,
    Valid,
    Test,
}

/// A context sequence followed by an entity of `label` with probability `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedContext {
    pub context: Vec<Token>,
    pub label: String,
    pub rate: f64,
    pub splits: SplitMask,
    /// Relative frequency among planted contexts.
    pub weight: f64,
}

impl PlantedContext {
    pub fn new(context: &[&str], label: &str, rate: f64) -> Result<Self, ArgumentError> {
        let context = context
            .iter()
            .map(|s| Token::new(*s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PlantedContext {
            context,
            label: label.to_string(),
            rate,
            splits: SplitMask::ALL,
            weight: 1.0,
        })
    }

    pub fn in_splits(mut self, splits: SplitMask) -> Self {
        self.splits = splits;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// A token sequence inserted into text but never followed by an entity.
#[derive(Debug, Clone, PartialEq)]
pub struct Distractor {
    pub tokens: Vec<Token>,
    pub splits: SplitMask,
    pub weight: f64,
}

impl Distractor {
    pub fn new(tokens: &[&str]) -> Result<Self, ArgumentError> {
        let tokens = tokens
            .iter()
            .map(|s| Token::new(*s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Distractor {
            tokens,
            splits: SplitMask::ALL,
            weight: 1.0,
        })
    }

    pub fn in_splits(mut self, splits: SplitMask) -> Self {
        self.splits = splits;
        self
    }
}

/// Parameters of [`generate_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub vocab_size: usize,
    pub n_docs: usize,
    pub planted: Vec<PlantedContext>,
    pub distractors: Vec<Distractor>,
    /// Inclusive range of background-token counts per document.
    pub doc_len: (usize, usize),
    /// Per-token probability of inserting a planted context.
    pub plant_prob: f64,
    /// Per-token probability of inserting a distractor.
    pub distractor_prob: f64,
    /// Per-token probability of an entity following ordinary background text.
    pub background_entity_prob: f64,
    /// Fractions of documents assigned to train and validation; the rest is test.
    pub train_frac: f64,
    pub valid_frac: f64,
    /// Zipf exponent of the background distribution.
    pub zipf_exponent: f64,
    /// Distinct surface names per entity label.
    pub names_per_label: usize,
}

impl SyntheticConfig {
    pub fn new(seed: u64, vocab_size: usize, n_docs: usize, planted: Vec<PlantedContext>) -> Self {
        SyntheticConfig {
            seed,
            vocab_size,
            n_docs,
            planted,
            distractors: Vec::new(),
            doc_len: (60, 140),
            plant_prob: 0.02,
            distractor_prob: 0.0,
            background_entity_prob: 0.01,
            train_frac: 0.6,
            valid_frac: 0.2,
            zipf_exponent: 1.0,
            names_per_label: 50,
        }
    }
}

/// Convenience wrapper with default knobs.
pub fn generate_synthetic(
    seed: u64,
    vocab_size: usize,
    n_docs: usize,
    planted: &[PlantedContext],
) -> Result<SplitSet, ArgumentError> {
    generate(&SyntheticConfig::new(
        seed,
        vocab_size,
        n_docs,
        planted.to_vec(),
    ))
}

const SYLLABLES: [&str; 16] = [
    "ba", "de", "fi", "go", "ku", "la", "me", "ni", "po", "ra", "se", "ti", "vo", "wu", "xa", "zo",
];

/// Background word `i`: a pronounceable lowercase string, unique per index.
fn background_word(mut i: usize) -> String {
    let mut word = String::new();
    loop {
        word.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
        if i == 0 {
            break;
        }
        i -= 1;
    }
    word
}

fn entity_name(label: &str, i: usize) -> Token {
    let base = background_word(i);
    let mut chars = base.chars();
    let first = chars.next().unwrap_or('x').to_ascii_uppercase();
    Token(format!(
        "{first}{}{}",
        chars.as_str(),
        label.to_ascii_lowercase()
    ))
}

/// Generates a seeded train/valid/test corpus with planted entity contexts.
///
/// Background tokens follow a Zipf law over `vocab_size` synthetic words,
/// so the resulting frequency tables are long-tailed.
pub fn generate(config: &SyntheticConfig) -> Result<SplitSet, ArgumentError> {
    if config.vocab_size == 0 {
        return Err(ArgumentError::new("vocab_size must be positive"));
    }
    if config.n_docs == 0 {
        return Err(ArgumentError::new("n_docs must be positive"));
    }
    for p in &config.planted {
        if p.context.is_empty() {
            return Err(ArgumentError::new("planted context must be non-empty"));
        }
        if p.context.len() > config.vocab_size {
            return Err(ArgumentError::new(
                "vocab_size must be at least the planted context length",
            ));
        }
        if !(p.rate > 0.0 && p.rate <= 1.0) {
            return Err(ArgumentError::new(format!(
                "planted rate {} outside (0, 1]",
                p.rate
            )));
        }
        if p.label.is_empty() || p.label.chars().any(char::is_whitespace) {
            return Err(ArgumentError::new("planted label must be a non-empty word"));
        }
        if p.weight.is_nan() || p.weight <= 0.0 {
            return Err(ArgumentError::new("planted weight must be positive"));
        }
    }
    if config
        .distractors
        .iter()
        .any(|d| d.tokens.is_empty() || d.weight.is_nan() || d.weight <= 0.0)
    {
        return Err(ArgumentError::new(
            "distractors need tokens and a positive weight",
        ));
    }
    let (min_len, max_len) = config.doc_len;
    if min_len == 0 || min_len > max_len {
        return Err(ArgumentError::new(
            "doc_len must be a non-empty positive range",
        ));
    }
    let fracs_ok = (0.0..=1.0).contains(&config.train_frac)
        && (0.0..=1.0).contains(&config.valid_frac)
        && config.train_frac + config.valid_frac <= 1.0;
    if !fracs_ok {
        return Err(ArgumentError::new(
            "split fractions must lie in [0, 1] and sum to at most 1",
        ));
    }
    for prob in [
        config.plant_prob,
        config.distractor_prob,
        config.background_entity_prob,
    ] {
        if !(0.0..1.0).contains(&prob) {
            return Err(ArgumentError::new(
                "insertion probabilities must lie in [0, 1)",
            ));
        }
    }
    if config.names_per_label == 0 {
        return Err(ArgumentError::new("names_per_label must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab: Vec<Token> = (0..config.vocab_size)
        .map(|i| Token(background_word(i)))
        .collect();
    let zipf = WeightedIndex::new(
        (1..=config.vocab_size).map(|rank| 1.0 / (rank as f64).powf(config.zipf_exponent)),
    )
    .map_err(|e| ArgumentError::new(e.to_string()))?;

    let mut labels: BTreeSet<&str> = config.planted.iter().map(|p| p.label.as_str()).collect();
    if labels.is_empty() {
        labels.insert("PER");
    }
    let labels: Vec<&str> = labels.into_iter().collect();

    let n_train = (config.n_docs as f64 * config.train_frac).round() as usize;
    let n_valid =
        ((config.n_docs as f64 * config.valid_frac).round() as usize).min(config.n_docs - n_train);

    let mut out = SplitSet::default();
    for doc_idx in 0..config.n_docs {
        let split = if doc_idx < n_train {
            Split::Train
        } else if doc_idx < n_train + n_valid {
            Split::Valid
        } else {
            Split::Test
        };
        let planted: Vec<&PlantedContext> = config
            .planted
            .iter()
            .filter(|p| p.splits.allows(split))
            .collect();
        let distractors: Vec<&Distractor> = config
            .distractors
            .iter()
            .filter(|d| d.splits.allows(split))
            .collect();
        let plant_pick = WeightedIndex::new(planted.iter().map(|p| p.weight)).ok();
        let distractor_pick = WeightedIndex::new(distractors.iter().map(|d| d.weight)).ok();

        let target_len = rng.gen_range(min_len..=max_len);
        let mut tokens: Vec<Token> = Vec::with_capacity(target_len + 16);
        let mut spans = Vec::new();
        let mut background = 0;
        while background < target_len {
            let roll: f64 = rng.gen();
            if let (Some(pick), true) = (&plant_pick, roll < config.plant_prob) {
                let p = planted[pick.sample(&mut rng)];
                tokens.extend(p.context.iter().cloned());
                if rng.gen::<f64>() < p.rate {
                    push_entity(&mut rng, &mut tokens, &mut spans, &p.label, config);
                }
            } else if let (Some(pick), true) = (
                &distractor_pick,
                roll < config.plant_prob + config.distractor_prob,
            ) {
                let d = distractors[pick.sample(&mut rng)];
                tokens.extend(d.tokens.iter().cloned());
                tokens.push(vocab[zipf.sample(&mut rng)].clone());
                background += 1;
            } else if roll
                < config.plant_prob + config.distractor_prob + config.background_entity_prob
                && !tokens.is_empty()
            {
                let label = labels[rng.gen_range(0..labels.len())];
                push_entity(&mut rng, &mut tokens, &mut spans, label, config);
            } else {
                tokens.push(vocab[zipf.sample(&mut rng)].clone());
                background += 1;
            }
        }
        let doc = Document::new(tokens, spans).expect("generator keeps spans valid");
        match split {
            Split::Train => out.train.push(doc),
            Split::Valid => out.valid.push(doc),
            Split::Test => out.test.push(doc),
        }
    }
    Ok(out)
}

fn push_entity(
    rng: &mut ChaCha8Rng,
    tokens: &mut Vec<Token>,
    spans: &mut Vec<EntitySpan>,
    label: &str,
    config: &SyntheticConfig,
) {
    let start = tokens.len();
    let len = rng.gen_range(1..=2);
    for _ in 0..len {
        tokens.push(entity_name(label, rng.gen_range(0..config.names_per_label)));
    }
    spans.push(EntitySpan {
        start,
        end: tokens.len(),
        label: label.to_string(),
    });
}
