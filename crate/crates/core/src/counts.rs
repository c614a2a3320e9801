//! Frequency tables: N-gram counts over the whole corpus (denominator
//! sample) and immediately left of entities of one type (numerator sample),
//! their wildcard-unit aggregation, and Kneser–Ney support tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;

use crate::corpus::{Document, Token};
use crate::error::{ArgumentError, ParseError};

/// A contiguous sequence of N items.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NGram(Vec<Token>);

impl NGram {
    pub fn new(items: Vec<Token>) -> Result<Self, ArgumentError> {
        if items.is_empty() {
            return Err(ArgumentError::new("an N-gram needs at least one item"));
        }
        Ok(NGram(items))
    }

    /// Builds an N-gram from string items, validating each as a [`Token`].
    pub fn from_strs(items: &[&str]) -> Result<Self, ArgumentError> {
        let tokens = items
            .iter()
            .map(|s| Token::new(*s))
            .collect::<Result<Vec<_>, _>>()?;
        NGram::new(tokens)
    }

    /// Parses the space-joined form produced by `Display`.
    pub fn parse(key: &str) -> Result<Self, ArgumentError> {
        let items: Vec<&str> = key.split(' ').collect();
        NGram::from_strs(&items)
    }

    pub fn items(&self) -> &[Token] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(item.as_str())?;
        }
        Ok(())
    }
}

/// The wildcard unit that keeps only position `position` (1-based) of an
/// order-`order` N-gram.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UnitPattern {
    pub order: usize,
    pub position: usize,
    pub item: Token,
}

impl fmt::Display for UnitPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for k in 1..=self.order {
            if k > 1 {
                f.write_str(" ")?;
            }
            if k == self.position {
                f.write_str(self.item.as_str())?;
            } else {
                f.write_str("•")?;
            }
        }
        Ok(())
    }
}

/// Entity type whose left contexts form the numerator sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityTypeFilter {
    label: String,
}

impl EntityTypeFilter {
    pub fn new(label: impl Into<String>) -> Result<Self, ArgumentError> {
        let label = label.into();
        if label.is_empty() || label.chars().any(char::is_whitespace) {
            return Err(ArgumentError::new(format!(
                "invalid entity label {label:?}"
            )));
        }
        Ok(EntityTypeFilter { label })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// All contiguous windows of `order` items, never crossing the document.
pub fn extract_ngrams(doc: &Document, order: usize) -> Vec<NGram> {
    if order == 0 || doc.len() < order {
        return Vec::new();
    }
    doc.tokens()
        .windows(order)
        .map(|w| NGram(w.to_vec()))
        .collect()
}

/// Windows whose last item immediately precedes a span of the filter label.
pub fn left_context_ngrams(doc: &Document, order: usize, filter: &EntityTypeFilter) -> Vec<NGram> {
    if order == 0 {
        return Vec::new();
    }
    doc.spans()
        .iter()
        .filter(|s| s.label == filter.label && s.start >= order)
        .map(|s| NGram(doc.tokens()[s.start - order..s.start].to_vec()))
        .collect()
}

/// Splits `w` into its N wildcard units, position 1 first.
pub fn itemize(w: &NGram) -> Vec<UnitPattern> {
    let order = w.order();
    w.items()
        .iter()
        .enumerate()
        .map(|(i, item)| UnitPattern {
            order,
            position: i + 1,
            item: item.clone(),
        })
        .collect()
}

/// One level of an interpolated Kneser–Ney recursion.
///
/// `counts` holds raw counts at the top level and continuation counts
/// (distinct left extensions) below it; `context_totals` and
/// `context_types` are the per-context sum and number of distinct
/// successors of `counts`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnLevel {
    pub counts: BTreeMap<Vec<Token>, u64>,
    pub context_totals: BTreeMap<Vec<Token>, u64>,
    pub context_types: BTreeMap<Vec<Token>, u64>,
}

impl KnLevel {
    fn from_counts(counts: BTreeMap<Vec<Token>, u64>) -> Self {
        let mut context_totals: BTreeMap<Vec<Token>, u64> = BTreeMap::new();
        let mut context_types: BTreeMap<Vec<Token>, u64> = BTreeMap::new();
        for (key, &c) in &counts {
            let ctx = key[..key.len() - 1].to_vec();
            *context_totals.entry(ctx.clone()).or_default() += c;
            *context_types.entry(ctx).or_default() += 1;
        }
        KnLevel {
            counts,
            context_totals,
            context_types,
        }
    }

    pub fn count(&self, key: &[Token]) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn context_total(&self, ctx: &[Token]) -> u64 {
        self.context_totals.get(ctx).copied().unwrap_or(0)
    }

    pub fn context_type_count(&self, ctx: &[Token]) -> u64 {
        self.context_types.get(ctx).copied().unwrap_or(0)
    }
}

/// Support tables for the conditional of the item at one position given
/// all items before it. `levels[l - 1]` conditions on `l - 1` items; the
/// last level uses raw prefix counts, the others continuation counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnFactor {
    pub levels: Vec<KnLevel>,
}

/// Kneser–Ney support tables for one sample, one factor per position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnTables {
    pub factors: Vec<KnFactor>,
}

impl KnTables {
    fn from_ngram_counts(order: usize, counts: &BTreeMap<NGram, u64>) -> Self {
        let factors = (1..=order)
            .map(|m| {
                let mut prefix: BTreeMap<Vec<Token>, u64> = BTreeMap::new();
                for (w, &c) in counts {
                    *prefix.entry(w.items()[..m].to_vec()).or_default() += c;
                }
                let mut levels = Vec::with_capacity(m);
                for len in 1..m {
                    let suffixes: BTreeSet<&[Token]> =
                        prefix.keys().map(|k| &k[m - len - 1..]).collect();
                    let mut continuation: BTreeMap<Vec<Token>, u64> = BTreeMap::new();
                    for s in suffixes {
                        *continuation.entry(s[1..].to_vec()).or_default() += 1;
                    }
                    levels.push(KnLevel::from_counts(continuation));
                }
                levels.push(KnLevel::from_counts(prefix));
                KnFactor { levels }
            })
            .collect();
        KnTables { factors }
    }

    /// Tables for the item at 1-based `position`.
    pub fn factor(&self, position: usize) -> &KnFactor {
        &self.factors[position - 1]
    }
}

/// Every count the estimators consume, built from one corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyModel {
    order: usize,
    label: String,
    de_counts: BTreeMap<NGram, u64>,
    nu_counts: BTreeMap<NGram, u64>,
    de_unit_counts: BTreeMap<UnitPattern, u64>,
    nu_unit_counts: BTreeMap<UnitPattern, u64>,
    n_de: u64,
    n_nu: u64,
    vocab: BTreeSet<Token>,
    kn_de: KnTables,
    kn_nu: KnTables,
}

impl FrequencyModel {
    pub fn empty(order: usize, label: &str) -> Result<Self, ArgumentError> {
        Self::from_ngram_counts(order, label, BTreeMap::new(), BTreeMap::new())
    }

    /// Derives unit tables, totals, vocabulary and KN tables from the two
    /// N-gram multisets.
    pub fn from_ngram_counts(
        order: usize,
        label: &str,
        de_counts: BTreeMap<NGram, u64>,
        nu_counts: BTreeMap<NGram, u64>,
    ) -> Result<Self, ArgumentError> {
        if order == 0 {
            return Err(ArgumentError::new("order must be at least 1"));
        }
        EntityTypeFilter::new(label)?;
        for w in de_counts.keys().chain(nu_counts.keys()) {
            if w.order() != order {
                return Err(ArgumentError::new(format!(
                    "N-gram `{w}` has order {} but the model has order {order}",
                    w.order()
                )));
            }
        }
        let de_counts: BTreeMap<NGram, u64> =
            de_counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let nu_counts: BTreeMap<NGram, u64> =
            nu_counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let units = |counts: &BTreeMap<NGram, u64>| {
            let mut table: BTreeMap<UnitPattern, u64> = BTreeMap::new();
            for (w, &c) in counts {
                for u in itemize(w) {
                    *table.entry(u).or_default() += c;
                }
            }
            table
        };
        let vocab = de_counts
            .keys()
            .chain(nu_counts.keys())
            .flat_map(|w| w.items().iter().cloned())
            .collect();
        Ok(FrequencyModel {
            order,
            label: label.to_string(),
            de_unit_counts: units(&de_counts),
            nu_unit_counts: units(&nu_counts),
            n_de: de_counts.values().sum(),
            n_nu: nu_counts.values().sum(),
            vocab,
            kn_de: KnTables::from_ngram_counts(order, &de_counts),
            kn_nu: KnTables::from_ngram_counts(order, &nu_counts),
            de_counts,
            nu_counts,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_de(&self) -> u64 {
        self.n_de
    }

    pub fn n_nu(&self) -> u64 {
        self.n_nu
    }

    pub fn c_de(&self, w: &NGram) -> u64 {
        self.de_counts.get(w).copied().unwrap_or(0)
    }

    pub fn c_nu(&self, w: &NGram) -> u64 {
        self.nu_counts.get(w).copied().unwrap_or(0)
    }

    pub fn unit_de(&self, u: &UnitPattern) -> u64 {
        self.de_unit_counts.get(u).copied().unwrap_or(0)
    }

    pub fn unit_nu(&self, u: &UnitPattern) -> u64 {
        self.nu_unit_counts.get(u).copied().unwrap_or(0)
    }

    pub fn de_counts(&self) -> &BTreeMap<NGram, u64> {
        &self.de_counts
    }

    pub fn nu_counts(&self) -> &BTreeMap<NGram, u64> {
        &self.nu_counts
    }

    pub fn de_unit_counts(&self) -> &BTreeMap<UnitPattern, u64> {
        &self.de_unit_counts
    }

    pub fn nu_unit_counts(&self) -> &BTreeMap<UnitPattern, u64> {
        &self.nu_unit_counts
    }

    pub fn vocab(&self) -> &BTreeSet<Token> {
        &self.vocab
    }

    pub fn kn_de(&self) -> &KnTables {
        &self.kn_de
    }

    pub fn kn_nu(&self) -> &KnTables {
        &self.kn_nu
    }

    /// Pointwise sum of the count tables. KN continuation counts are not
    /// additive, so they are re-derived from the summed N-gram tables.
    pub fn merge(&self, other: &FrequencyModel) -> Result<FrequencyModel, ArgumentError> {
        if self.order != other.order {
            return Err(ArgumentError::new(format!(
                "cannot merge models of order {} and {}",
                self.order, other.order
            )));
        }
        if self.label != other.label {
            return Err(ArgumentError::new(format!(
                "cannot merge models for labels {} and {}",
                self.label, other.label
            )));
        }
        let sum = |a: &BTreeMap<NGram, u64>, b: &BTreeMap<NGram, u64>| {
            let mut out = a.clone();
            for (w, &c) in b {
                *out.entry(w.clone()).or_default() += c;
            }
            out
        };
        FrequencyModel::from_ngram_counts(
            self.order,
            &self.label,
            sum(&self.de_counts, &other.de_counts),
            sum(&self.nu_counts, &other.nu_counts),
        )
    }

    /// Line-oriented `kind<TAB>key<TAB>count` form, sorted within each kind.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{FORMAT_HEADER}\n"));
        out.push_str(&format!("meta\torder\t{}\n", self.order));
        out.push_str(&format!("meta\tlabel\t{}\n", self.label));
        out.push_str(&format!("meta\tn_de\t{}\n", self.n_de));
        out.push_str(&format!("meta\tn_nu\t{}\n", self.n_nu));
        for (w, c) in &self.de_counts {
            out.push_str(&format!("de\t{w}\t{c}\n"));
        }
        for (w, c) in &self.nu_counts {
            out.push_str(&format!("nu\t{w}\t{c}\n"));
        }
        for (u, c) in &self.de_unit_counts {
            out.push_str(&format!("ude\t{} {}\t{c}\n", u.position, u.item));
        }
        for (u, c) in &self.nu_unit_counts {
            out.push_str(&format!("unu\t{} {}\t{c}\n", u.position, u.item));
        }
        out
    }

    /// Reads [`FrequencyModel::to_text`] output, re-deriving and checking
    /// every aggregate table.
    pub fn from_text(text: &str) -> Result<FrequencyModel, ParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == FORMAT_HEADER => {}
            _ => {
                return Err(ParseError::new(
                    1,
                    format!("expected header {FORMAT_HEADER:?}"),
                ))
            }
        }
        let mut order = None;
        let mut label = None;
        let mut totals = (None, None);
        let mut de = BTreeMap::new();
        let mut nu = BTreeMap::new();
        let mut ude = BTreeMap::new();
        let mut unu = BTreeMap::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            let mut cols = line.split('\t');
            let (Some(kind), Some(key), Some(value), None) =
                (cols.next(), cols.next(), cols.next(), cols.next())
            else {
                return Err(ParseError::new(
                    lineno,
                    "expected three tab-separated columns",
                ));
            };
            let count = || {
                value
                    .parse::<u64>()
                    .map_err(|e| ParseError::new(lineno, format!("bad count {value:?}: {e}")))
            };
            let bad = |e: ArgumentError| ParseError::new(lineno, e.message);
            match (kind, key) {
                ("meta", "order") => order = Some(count()? as usize),
                ("meta", "label") => label = Some(value.to_string()),
                ("meta", "n_de") => totals.0 = Some(count()?),
                ("meta", "n_nu") => totals.1 = Some(count()?),
                ("de", _) => {
                    de.insert(NGram::parse(key).map_err(bad)?, count()?);
                }
                ("nu", _) => {
                    nu.insert(NGram::parse(key).map_err(bad)?, count()?);
                }
                ("ude", _) | ("unu", _) => {
                    let (pos, item) = key.split_once(' ').ok_or_else(|| {
                        ParseError::new(lineno, "unit key must be `position item`")
                    })?;
                    let position = pos
                        .parse::<usize>()
                        .map_err(|e| ParseError::new(lineno, e.to_string()))?;
                    let item = Token::new(item).map_err(bad)?;
                    let table = if kind == "ude" { &mut ude } else { &mut unu };
                    table.insert((position, item), count()?);
                }
                _ => {
                    return Err(ParseError::new(
                        lineno,
                        format!("unknown record {kind}/{key}"),
                    ))
                }
            }
        }
        let end = text.lines().count();
        let order = order.ok_or_else(|| ParseError::new(end, "missing order"))?;
        let label = label.ok_or_else(|| ParseError::new(end, "missing label"))?;
        let model = FrequencyModel::from_ngram_counts(order, &label, de, nu)
            .map_err(|e| ParseError::new(end, e.message))?;
        if totals != (Some(model.n_de), Some(model.n_nu)) {
            return Err(ParseError::new(
                end,
                "totals do not match the N-gram tables",
            ));
        }
        let flatten = |t: &BTreeMap<UnitPattern, u64>| -> BTreeMap<(usize, Token), u64> {
            t.iter()
                .map(|(u, &c)| ((u.position, u.item.clone()), c))
                .collect()
        };
        if flatten(&model.de_unit_counts) != ude || flatten(&model.nu_unit_counts) != unu {
            return Err(ParseError::new(
                end,
                "unit tables do not match the N-gram tables",
            ));
        }
        Ok(model)
    }
}

const FORMAT_HEADER: &str = "#ngram-lr-model\tv1";

fn count_windows(
    docs: &[Document],
    order: usize,
    filter: &EntityTypeFilter,
) -> (BTreeMap<NGram, u64>, BTreeMap<NGram, u64>) {
    let mut de: BTreeMap<NGram, u64> = BTreeMap::new();
    let mut nu: BTreeMap<NGram, u64> = BTreeMap::new();
    for doc in docs {
        for w in extract_ngrams(doc, order) {
            *de.entry(w).or_default() += 1;
        }
        for w in left_context_ngrams(doc, order, filter) {
            *nu.entry(w).or_default() += 1;
        }
    }
    (de, nu)
}

/// Counts every window (denominator) and every window abutting a span of
/// the filter's label (numerator).
pub fn build_model(
    docs: &[Document],
    order: usize,
    filter: &EntityTypeFilter,
) -> Result<FrequencyModel, ArgumentError> {
    let (de, nu) = count_windows(docs, order, filter);
    FrequencyModel::from_ngram_counts(order, filter.label(), de, nu)
}

/// Same result as [`build_model`], counting `shards` document chunks in
/// parallel and merging.
pub fn build_model_parallel(
    docs: &[Document],
    order: usize,
    filter: &EntityTypeFilter,
    shards: usize,
) -> Result<FrequencyModel, ArgumentError> {
    let chunk = docs.len().div_ceil(shards.max(1)).max(1);
    docs.par_chunks(chunk)
        .map(|part| build_model(part, order, filter))
        .try_reduce(
            || FrequencyModel::empty(order, filter.label()).expect("validated by filter"),
            |a, b| a.merge(&b),
        )
}
