//! Ready-made synthetic corpora.

use crate::corpus::{Distractor, PlantedContext, SplitMask, SyntheticConfig};
use crate::error::ArgumentError;

pub const VERBS: [&str; 8] = [
    "says", "told", "met", "said", "asked", "thanked", "praised", "called",
];
pub const TITLES: [&str; 8] = [
    "Mr.",
    "Mrs.",
    "Dr.",
    "President",
    "Senator",
    "Judge",
    "Governor",
    "Minister",
];

/// How a `(verb, title)` pair is used by [`title_contexts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRole {
    /// Precedes a PER entity in every split.
    Seen,
    /// Precedes a PER entity in validation and test documents only.
    HeldOut,
    /// Occurs in every split but is never followed by an entity.
    Distractor,
}

/// Role of pair `(VERBS[i], TITLES[j])`.
pub fn pair_role(i: usize, j: usize) -> PairRole {
    match (i + j) % 4 {
        0 => PairRole::Seen,
        2 => PairRole::Distractor,
        _ => PairRole::HeldOut,
    }
}

/// Bigram contexts of PER entities built from verb × title pairs.
///
/// A quarter of the pairs are seen in training, half appear only in
/// validation and test, and the remaining quarter are distractors whose
/// items are frequent entity-context units but which never precede an
/// entity themselves.
pub fn title_contexts(
    seed: u64,
    n_docs: usize,
    vocab_size: usize,
) -> Result<SyntheticConfig, ArgumentError> {
    let mut planted = Vec::new();
    let mut distractors = Vec::new();
    for (i, verb) in VERBS.iter().enumerate() {
        for (j, title) in TITLES.iter().enumerate() {
            match pair_role(i, j) {
                PairRole::Seen => planted.push(PlantedContext::new(&[verb, title], "PER", 0.9)?),
                PairRole::HeldOut => planted.push(
                    PlantedContext::new(&[verb, title], "PER", 0.9)?.in_splits(SplitMask::HELD_OUT),
                ),
                PairRole::Distractor => distractors.push(Distractor::new(&[verb, title])?),
            }
        }
    }
    let mut config = SyntheticConfig::new(seed, vocab_size, n_docs, planted);
    config.distractors = distractors;
    config.plant_prob = 0.02;
    config.distractor_prob = 0.02;
    config.background_entity_prob = 0.003;
    Ok(config)
}
