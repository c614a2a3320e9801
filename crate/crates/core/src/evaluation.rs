//! Ranking evaluation: score every test N-gram, sort by estimate, label
//! against the entity contexts observed in the test documents, and
//! summarize with rank–recall and precision–recall curves. Regularization
//! parameters are chosen by maximizing the rank–recall area on validation
//! documents.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::corpus::Document;
use crate::counts::{extract_ngrams, left_context_ngrams, EntityTypeFilter, FrequencyModel, NGram};
use crate::error::{ArgumentError, Error, EstimatorError};
use crate::estimators::{
    estimate, kn_conditional_tables, Estimate, EstimateValue, EstimatorConfig, EstimatorKind,
    KnDiscounts, Side,
};
use crate::sweeps::LAMBDA_GRID;

pub const DEFAULT_CUTOFF: usize = 8000;
/// Ranks at which precision–recall markers are emitted.
pub const MARKER_STEP: usize = 1000;

/// Every distinct window of the test documents.
pub fn candidate_set(test_docs: &[Document], order: usize) -> BTreeSet<NGram> {
    test_docs
        .iter()
        .flat_map(|d| extract_ngrams(d, order))
        .collect()
}

/// N-grams seen at least `min_count` times directly left of a filtered
/// entity in the test documents.
pub fn truth_labels(
    test_docs: &[Document],
    filter: &EntityTypeFilter,
    order: usize,
    min_count: u64,
) -> BTreeSet<NGram> {
    let mut counts: BTreeMap<NGram, u64> = BTreeMap::new();
    for doc in test_docs {
        for w in left_context_ngrams(doc, order, filter) {
            *counts.entry(w).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .map(|(w, _)| w)
        .collect()
}

/// Scores candidates in parallel; output order follows the input order.
pub fn score_candidates(
    model: &FrequencyModel,
    candidates: &[NGram],
    config: &EstimatorConfig,
) -> Result<Vec<(NGram, Estimate)>, EstimatorError> {
    config.validate(model.order())?;
    candidates
        .par_iter()
        .map(|w| estimate(model, w, config).map(|e| (w.clone(), e)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub ngram: NGram,
    pub estimate: Estimate,
    pub truth: bool,
}

/// Candidates in descending estimate order, ties broken by N-gram items.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
    pub cutoff: usize,
}

/// Sorts scored candidates and keeps the top `cutoff`.
///
/// Duplicate N-grams keep their first score.
pub fn rank(scored: Vec<(NGram, Estimate)>, truth: &BTreeSet<NGram>, cutoff: usize) -> RankedList {
    let mut seen = BTreeSet::new();
    let mut entries: Vec<RankedEntry> = scored
        .into_iter()
        .filter(|(w, _)| seen.insert(w.clone()))
        .map(|(ngram, estimate)| RankedEntry {
            truth: truth.contains(&ngram),
            ngram,
            estimate,
        })
        .collect();
    entries.sort_by(|a, b| {
        a.estimate
            .value
            .rank_cmp(&b.estimate.value)
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    entries.truncate(cutoff);
    RankedList { entries, cutoff }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rank: usize,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    RankRecall,
    PrecisionRecall,
}

/// Per-rank recall and precision of a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    /// Mean recall over the evaluated ranks.
    pub auc: f64,
    pub cutoff: usize,
    pub relevant: usize,
}

impl CurveSeries {
    /// Points at ranks 1000, 2000, … up to the cutoff.
    pub fn markers(&self) -> Vec<CurvePoint> {
        self.points
            .iter()
            .filter(|p| p.rank % MARKER_STEP == 0)
            .copied()
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind {
            CurveKind::RankRecall => {
                out.push_str("rank,recall\n");
                for p in &self.points {
                    out.push_str(&format!("{},{}\n", p.rank, p.recall));
                }
            }
            CurveKind::PrecisionRecall => {
                out.push_str("recall,precision\n");
                for p in &self.points {
                    out.push_str(&format!("{},{}\n", p.recall, p.precision));
                }
            }
        }
        out
    }

    pub fn markers_csv(&self) -> String {
        let mut out = String::from("rank,recall,precision\n");
        for p in self.markers() {
            out.push_str(&format!("{},{},{}\n", p.rank, p.recall, p.precision));
        }
        out
    }

    pub fn final_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }

    pub fn recall_at(&self, rank: usize) -> f64 {
        if rank == 0 {
            return 0.0;
        }
        let idx = rank.min(self.points.len());
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].recall
        }
    }
}

fn curve(
    ranked: &RankedList,
    relevant: &BTreeSet<NGram>,
    kind: CurveKind,
) -> Result<CurveSeries, ArgumentError> {
    if relevant.is_empty() {
        return Err(ArgumentError::new("the correction set is empty"));
    }
    let total = relevant.len() as f64;
    let mut hits = 0usize;
    let points: Vec<CurvePoint> = ranked
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if relevant.contains(&e.ngram) {
                hits += 1;
            }
            let rank = i + 1;
            CurvePoint {
                rank,
                recall: hits as f64 / total,
                precision: hits as f64 / rank as f64,
            }
        })
        .collect();
    let auc = if points.is_empty() {
        0.0
    } else {
        points.iter().map(|p| p.recall).sum::<f64>() / points.len() as f64
    };
    Ok(CurveSeries {
        kind,
        points,
        auc,
        cutoff: ranked.cutoff,
        relevant: relevant.len(),
    })
}

pub fn rank_recall(
    ranked: &RankedList,
    relevant: &BTreeSet<NGram>,
) -> Result<CurveSeries, ArgumentError> {
    curve(ranked, relevant, CurveKind::RankRecall)
}

pub fn precision_recall(
    ranked: &RankedList,
    relevant: &BTreeSet<NGram>,
) -> Result<CurveSeries, ArgumentError> {
    curve(ranked, relevant, CurveKind::PrecisionRecall)
}

/// Candidate regularization values, strictly positive and increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningGrid {
    values: Vec<f64>,
}

impl TuningGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, ArgumentError> {
        if values.is_empty() {
            return Err(ArgumentError::new("tuning grid is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ArgumentError::new(
                "grid values must be positive and finite",
            ));
        }
        if values.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ArgumentError::new(
                "grid values must be strictly increasing",
            ));
        }
        Ok(TuningGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            values: LAMBDA_GRID.to_vec(),
        }
    }
}

/// Everything needed to evaluate one estimator configuration on a split.
#[derive(Debug, Clone)]
pub struct EvaluationSet {
    pub candidates: Vec<NGram>,
    pub relevant: BTreeSet<NGram>,
    pub cutoff: usize,
}

impl EvaluationSet {
    pub fn new(
        docs: &[Document],
        filter: &EntityTypeFilter,
        order: usize,
        cutoff: usize,
        truth_min_count: u64,
    ) -> Self {
        EvaluationSet {
            candidates: candidate_set(docs, order).into_iter().collect(),
            relevant: truth_labels(docs, filter, order, truth_min_count),
            cutoff,
        }
    }

    pub fn rank(
        &self,
        model: &FrequencyModel,
        config: &EstimatorConfig,
    ) -> Result<RankedList, EstimatorError> {
        let scored = score_candidates(model, &self.candidates, config)?;
        Ok(rank(scored, &self.relevant, self.cutoff))
    }

    pub fn auc(&self, model: &FrequencyModel, config: &EstimatorConfig) -> Result<f64, Error> {
        let ranked = self.rank(model, config)?;
        Ok(rank_recall(&ranked, &self.relevant)?.auc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub config: EstimatorConfig,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub best: EstimatorConfig,
    pub best_auc: f64,
    pub trace: Vec<TracePoint>,
}

/// Grid search maximizing validation rank–recall area.
///
/// `K` and `ITEM` scan the grid; `OURS` scans `λ_item × λ_d`. Ties keep
/// the earliest point, i.e. the smaller `λ` (then the smaller `λ_item`).
/// `B` and `KN` have nothing to scan here and return `base` with one
/// trace row.
pub fn tune(
    model: &FrequencyModel,
    validation: &EvaluationSet,
    base: &EstimatorConfig,
    grid: &TuningGrid,
) -> Result<TuneOutcome, Error> {
    if validation.relevant.is_empty() {
        return Err(ArgumentError::new("the validation correction set is empty").into());
    }
    let configs: Vec<EstimatorConfig> = match base.kind {
        EstimatorKind::B | EstimatorKind::Kn => vec![base.clone()],
        EstimatorKind::K => grid
            .values()
            .iter()
            .map(|&lambda| EstimatorConfig {
                lambda,
                ..base.clone()
            })
            .collect(),
        EstimatorKind::Item => grid
            .values()
            .iter()
            .map(|&lambda_item| EstimatorConfig {
                lambda_item,
                lambda_item_per_position: None,
                ..base.clone()
            })
            .collect(),
        EstimatorKind::Ours => grid
            .values()
            .iter()
            .flat_map(|&lambda_item| {
                grid.values()
                    .iter()
                    .map(move |&lambda_d| (lambda_item, lambda_d))
            })
            .map(|(lambda_item, lambda_d)| EstimatorConfig {
                lambda_item,
                lambda_d,
                lambda_item_per_position: None,
                ..base.clone()
            })
            .collect(),
    };
    let mut trace = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, config) in configs.into_iter().enumerate() {
        let auc = validation.auc(model, &config)?;
        if best.is_none_or(|(_, b)| auc > b) {
            best = Some((i, auc));
        }
        trace.push(TracePoint { config, auc });
    }
    let (idx, best_auc) = best.expect("at least one configuration");
    Ok(TuneOutcome {
        best: trace[idx].config.clone(),
        best_auc,
        trace,
    })
}

/// The default discount grid `0.1, 0.2, …, 0.9`.
pub const DISCOUNT_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct KnTracePoint {
    pub side: Side,
    pub position: usize,
    pub discount: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnTuneOutcome {
    pub discounts: KnDiscounts,
    pub trace: Vec<KnTracePoint>,
}

/// Training log-likelihood of the conditional at `position` (1-based):
/// `Σ_w c(w) · ln p(a_position | a_1..a_{position-1})` over one sample.
pub fn kn_log_likelihood(
    model: &FrequencyModel,
    side: Side,
    position: usize,
    discount: f64,
) -> Result<f64, EstimatorError> {
    let (counts, tables) = match side {
        Side::De => (model.de_counts(), model.kn_de()),
        Side::Nu => (model.nu_counts(), model.kn_nu()),
    };
    let vocab = model.vocab().len();
    let mut total = 0.0;
    for (w, &c) in counts {
        let items = w.items();
        let p = kn_conditional_tables(
            tables,
            vocab,
            &items[position - 1],
            &items[..position - 1],
            discount,
        )?;
        total += c as f64 * p.ln();
    }
    Ok(total)
}

/// Picks each of the `2N` discounts independently by training likelihood;
/// ties go to the smaller discount.
pub fn tune_kn(model: &FrequencyModel, grid: &[f64]) -> Result<KnTuneOutcome, Error> {
    if grid.is_empty() {
        return Err(ArgumentError::new("discount grid is empty").into());
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let order = model.order();
    let mut discounts = KnDiscounts::uniform(order, sorted[0]);
    let mut trace = Vec::with_capacity(2 * order * sorted.len());
    for side in [Side::De, Side::Nu] {
        for position in 1..=order {
            let mut best: Option<(f64, f64)> = None;
            for &d in &sorted {
                let ll = kn_log_likelihood(model, side, position, d)?;
                if best.is_none_or(|(_, b)| ll > b) {
                    best = Some((d, ll));
                }
                trace.push(KnTracePoint {
                    side,
                    position,
                    discount: d,
                    log_likelihood: ll,
                });
            }
            discounts.side_mut(side)[position - 1] = best.expect("non-empty grid").0;
        }
    }
    Ok(KnTuneOutcome { discounts, trace })
}

/// Number of leading entries with a positive (or infinite) score.
pub fn scored_prefix_len(ranked: &RankedList) -> usize {
    ranked
        .entries
        .iter()
        .take_while(|e| match e.estimate.value {
            EstimateValue::Finite(v) => v > 0.0,
            EstimateValue::Infinity => true,
            _ => false,
        })
        .count()
}
