use std::collections::BTreeMap;

use ngram_lr::corpus::{generate, parse_annotated, to_annotated, Document, EntitySpan, Token};
use ngram_lr::counts::{
    build_model, build_model_parallel, itemize, EntityTypeFilter, FrequencyModel, UnitPattern,
};
use ngram_lr::scenarios::title_contexts;
use proptest::prelude::*;

fn corpus(seed: u64, n_docs: usize) -> Vec<Document> {
    let split = generate(&title_contexts(seed, n_docs, 500).unwrap()).unwrap();
    let mut docs = split.train;
    docs.extend(split.valid);
    docs.extend(split.test);
    docs
}

fn check_conservation(m: &FrequencyModel) {
    assert_eq!(m.n_de(), m.de_counts().values().sum::<u64>());
    assert_eq!(m.n_nu(), m.nu_counts().values().sum::<u64>());
    for (units, total) in [
        (m.de_unit_counts(), m.n_de()),
        (m.nu_unit_counts(), m.n_nu()),
    ] {
        let mut per_position: BTreeMap<usize, u64> = BTreeMap::new();
        for (u, c) in units {
            *per_position.entry(u.position).or_default() += c;
        }
        if total > 0 {
            assert_eq!(per_position.len(), m.order());
        }
        assert!(per_position.values().all(|&s| s == total));
    }
    for (w, &c) in m.de_counts() {
        for u in itemize(w) {
            assert!(m.unit_de(&u) >= c);
        }
    }
    for (w, &c) in m.nu_counts() {
        assert!(
            m.c_de(w) >= c,
            "{w} counted left of an entity but not overall"
        );
        for u in itemize(w) {
            assert!(m.unit_nu(&u) >= c);
        }
    }
}

#[test]
fn conservation_on_synthetic_corpus() {
    let docs = corpus(11, 100);
    let per = EntityTypeFilter::new("PER").unwrap();
    for order in 1..=4 {
        let m = build_model(&docs, order, &per).unwrap();
        assert!(m.n_nu() > 0);
        check_conservation(&m);
    }
}

#[test]
fn parallel_build_equals_sequential() {
    let docs = corpus(5, 100);
    let per = EntityTypeFilter::new("PER").unwrap();
    let seq = build_model(&docs, 2, &per).unwrap();
    for shards in [1, 2, 3, 7, 100] {
        let par = build_model_parallel(&docs, 2, &per, shards).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.to_text(), seq.to_text());
    }
}

#[test]
fn merge_is_a_commutative_monoid() {
    let docs = corpus(9, 60);
    let per = EntityTypeFilter::new("PER").unwrap();
    let a = build_model(&docs[..20], 3, &per).unwrap();
    let b = build_model(&docs[20..45], 3, &per).unwrap();
    let c = build_model(&docs[45..], 3, &per).unwrap();
    let empty = FrequencyModel::empty(3, "PER").unwrap();
    assert_eq!(a.merge(&empty).unwrap(), a);
    assert_eq!(a.merge(&b).unwrap(), b.merge(&a).unwrap());
    assert_eq!(
        a.merge(&b).unwrap().merge(&c).unwrap(),
        a.merge(&b.merge(&c).unwrap()).unwrap()
    );
    assert_eq!(
        a.merge(&b).unwrap().merge(&c).unwrap(),
        build_model(&docs, 3, &per).unwrap()
    );
}

#[test]
fn model_text_is_stable() {
    let docs = corpus(3, 30);
    let per = EntityTypeFilter::new("PER").unwrap();
    let m1 = build_model(&docs, 2, &per).unwrap().to_text();
    let m2 = build_model(&docs, 2, &per).unwrap().to_text();
    assert_eq!(m1, m2);
    let back = FrequencyModel::from_text(&m1).unwrap();
    assert_eq!(back.to_text(), m1);
    let unit = UnitPattern {
        order: 2,
        position: 2,
        item: Token::new("Mr.").unwrap(),
    };
    assert!(back.unit_de(&unit) > 0);
}

fn arb_document() -> impl Strategy<Value = Document> {
    let token = prop::sample::select(vec!["a", "b", "Mr.", "says", "x_1", "ü"]);
    (
        prop::collection::vec(token, 1..30),
        prop::collection::vec((0usize..30, 1usize..4, prop::bool::ANY), 0..6),
    )
        .prop_map(|(tokens, raw_spans)| {
            let tokens: Vec<Token> = tokens.into_iter().map(|t| Token::new(t).unwrap()).collect();
            let mut spans = Vec::new();
            let mut next_free = 0;
            let mut starts: Vec<_> = raw_spans.into_iter().collect();
            starts.sort();
            for (start, len, loc) in starts {
                let end = (start + len).min(tokens.len());
                if start >= next_free && start < end {
                    spans.push(EntitySpan {
                        start,
                        end,
                        label: if loc { "LOC" } else { "PER" }.to_string(),
                    });
                    next_free = end;
                }
            }
            Document::new(tokens, spans).unwrap()
        })
}

proptest! {
    #[test]
    fn annotated_round_trip(docs in prop::collection::vec(arb_document(), 0..5)) {
        let text = to_annotated(&docs);
        let back = parse_annotated(&text).unwrap();
        prop_assert_eq!(back, docs);
    }

    #[test]
    fn conservation_holds_for_any_corpus(docs in prop::collection::vec(arb_document(), 1..5), order in 1usize..4) {
        let m = build_model(&docs, order, &EntityTypeFilter::new("PER").unwrap()).unwrap();
        check_conservation(&m);
    }
}
