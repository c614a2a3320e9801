//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ngram_lr::corpus::{generate_synthetic, Document, EntitySpan, PlantedContext, Token};
use ngram_lr::counts::{
    build_model, build_model_parallel, EntityTypeFilter, FrequencyModel, NGram,
};
use ngram_lr::estimators::{
    clamp_sum, dependency_beta, dependency_objective, itemized_ratio, kn_conditional, mle_ratio,
    regularized_ratio, EstimatorConfig, EstimatorKind, Side,
};
use ngram_lr::evaluation::{tune_kn, DISCOUNT_GRID};
use ngram_lr::scenarios::{pair_role, PairRole, TITLES, VERBS};
use ngram_lr::sweeps::{
    sweep_k, sweep_ours_lambda_d, sweep_ours_lambda_item, FIXED_LAMBDA_D, FIXED_LAMBDA_ITEM,
    ITEMIZED_EXAMPLE, JOINT_EXAMPLE, LAMBDA_GRID,
};
use ngram_lr_cli::commands::{cmd_count, cmd_generate, cmd_rank, cmd_tune};
use ngram_lr_cli::config::RunConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn joint_mle() -> Vec<f64> {
    JOINT_EXAMPLE
        .iter()
        .map(|r| r.mle().unwrap().finite().unwrap())
        .collect()
}

fn exact_mle() -> Check {
    let got = joint_mle();
    ensure(got == [20.0, 20.0, 40.0, 0.0], || format!("got {got:?}"))?;
    Ok(format!("{got:?}"))
}

fn exact_itemized() -> Check {
    let mut worst: f64 = 0.0;
    for r in &ITEMIZED_EXAMPLE {
        let v = r.item(0.0).map_err(|e| e.to_string())?;
        let err = rel_err(v, 12_500.0, 12_500.0);
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("{} = {v}", r.joint.name))?;
    }
    Ok(format!("max relative error {worst:e}"))
}

/// First grid index at which `series[i] < 0.9 · mle`, or the grid length.
fn first_drop(series: &[f64], mle: f64) -> usize {
    series
        .iter()
        .position(|&v| v < 0.9 * mle)
        .unwrap_or(series.len())
}

fn k_sweep() -> Check {
    let sweep = sweep_k().map_err(|e| e.to_string())?;
    let mle = joint_mle();
    let mut dev: f64 = 0.0;
    for (j, &m) in mle.iter().enumerate() {
        let v = sweep.values[0][j];
        // the zero row is compared absolutely
        let err = if m == 0.0 { v.abs() } else { rel_err(v, m, m) };
        dev = dev.max(err);
        ensure(err <= 1e-3, || {
            format!("(a) {} at 1e-9 is {v}, MLE {m}", sweep.names[j])
        })?;
    }
    let drops: Vec<usize> = (0..4)
        .map(|j| first_drop(&sweep.series(j), mle[j]))
        .collect();
    ensure(drops[1] < drops[0] && drops[2] < drops[0], || {
        format!("(b) first drop below 90% at grid indices {drops:?}")
    })?;
    ensure(sweep.series(3).iter().all(|&v| v == 0.0), || {
        "(c) w_D not zero".into()
    })?;
    for j in 0..4 {
        ensure(non_increasing(&sweep.series(j)), || {
            format!("(d) {} not non-increasing", sweep.names[j])
        })?;
    }
    Ok(format!(
        "(a) max relative deviation {dev:.2e}; (b) 90% drops at lambda {:e} (A), {:e} (B), {:e} (C); (c) w_D = 0; (d) monotone",
        LAMBDA_GRID[drops[0]], LAMBDA_GRID[drops[1]], LAMBDA_GRID[drops[2]]
    ))
}

fn ours_sweeps() -> Check {
    let by_item = sweep_ours_lambda_item(FIXED_LAMBDA_D).map_err(|e| e.to_string())?;
    for j in 0..4 {
        ensure(non_increasing(&by_item.series(j)), || {
            format!("lambda_item sweep: {} not non-increasing", by_item.names[j])
        })?;
    }
    let d = by_item.series(3);
    ensure(d[d.len() - 1] < 1e-3 * d[0], || {
        format!(
            "lambda_item sweep: w_D ends at {} from {}",
            d[d.len() - 1],
            d[0]
        )
    })?;
    let first = &by_item.values[0];
    ensure(
        first[0] < first[1] && first[0] < first[2] && first[0] < first[3],
        || format!("lambda_item sweep: w_A not lowest at 1e-9: {first:?}"),
    )?;

    let by_d = sweep_ours_lambda_d(FIXED_LAMBDA_ITEM).map_err(|e| e.to_string())?;
    for j in 0..4 {
        ensure(non_decreasing(&by_d.series(j)), || {
            format!("lambda_d sweep: {} not non-decreasing", by_d.names[j])
        })?;
    }
    let mle = joint_mle();
    let scale = mle.iter().copied().fold(0.0, f64::max);
    let mut dev: f64 = 0.0;
    for (j, &m) in mle.iter().enumerate() {
        let v = by_d.values[0][j];
        // relative error is undefined for a zero MLE; use the column scale
        let err = rel_err(v, m, if m == 0.0 { scale } else { m });
        dev = dev.max(err);
        ensure(err <= 1e-2, || {
            format!("lambda_d sweep: {} at 1e-9 is {v}, MLE {m}", by_d.names[j])
        })?;
    }
    let last = by_d.values.last().unwrap();
    let dc = rel_err(last[3], last[2], last[2]);
    ensure(dc <= 0.05, || {
        format!("lambda_d sweep: w_D {} vs w_C {}", last[3], last[2])
    })?;
    Ok(format!(
        "lambda_item: monotone, w_D {:.2e} -> {:.2e}, w_A lowest ({:.1}); lambda_d: monotone, max deviation from MLE {dev:.2e} (w_D at 1e-9 = {:.4}), w_D/w_C differ by {dc:.2e}",
        d[0],
        d[d.len() - 1],
        first[0],
        by_d.values[0][3]
    ))
}

fn optimality_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    for case in 0..1000 {
        let n_de = rng.gen_range(1..=100_000u64);
        let n_nu = rng.gen_range(1..=10_000u64);
        let c_de = rng.gen_range(0..=n_de.min(500));
        let c_nu = rng.gen_range(0..=n_nu.min(500));
        let r_item = 10f64.powf(rng.gen_range(-2.0..2.0));
        let lambda_d = 10f64.powf(rng.gen_range(-3.0..0.0));
        let beta =
            dependency_beta(c_de, n_de, c_nu, n_nu, r_item, lambda_d).map_err(|e| e.to_string())?;
        let obj = |b: f64| dependency_objective(c_de, n_de, c_nu, n_nu, b, r_item, lambda_d);
        // the grid spans a range independent of the closed form
        let p_nu = c_nu as f64 / n_nu as f64;
        let bound = 2.0 * (p_nu / lambda_d + r_item) + 1.0;
        let grid_min = (0..10_000)
            .map(|i| obj(-bound + 2.0 * bound * i as f64 / 9_999.0))
            .fold(f64::INFINITY, f64::min);
        let gap = obj(beta) - grid_min;
        worst = worst.max(gap);
        ensure(gap <= 1e-3, || {
            format!("case {case}: closed form loses by {gap:e}")
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!(
        "1000 cases, worst excess over grid minimum {worst:.2e}, {secs:.2} s"
    ))
}

fn reduction_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases = 2000;
    let tol = 1e-9;
    for case in 0..cases {
        let n_de = rng.gen_range(1..=10_000_000u64);
        let n_nu = rng.gen_range(1..=100_000u64);
        let c_de = rng.gen_range(1..=n_de.min(100_000));
        let c_nu = rng.gen_range(0..=n_nu.min(100_000));
        let mle = mle_ratio(c_de, n_de, c_nu, n_nu)
            .map_err(|e| e.to_string())?
            .finite()
            .ok_or("MLE not finite")?;
        let k = regularized_ratio(c_de, n_de, c_nu, n_nu, 0.0).map_err(|e| e.to_string())?;
        ensure(
            rel_err(k, mle, mle.max(f64::MIN_POSITIVE)) <= tol || k == mle,
            || format!("case {case}: r_k = {k}, r_mle = {mle}"),
        )?;

        let units: Vec<(u64, u64, f64)> = (0..rng.gen_range(1..=4))
            .map(|_| {
                (
                    rng.gen_range(1..=n_de.min(1_000_000)),
                    rng.gen_range(0..=n_nu.min(10_000)),
                    10f64.powf(rng.gen_range(-9.0..-1.0)),
                )
            })
            .collect();
        let r_item = itemized_ratio(&units, n_de, n_nu).map_err(|e| e.to_string())?;
        let t_d =
            dependency_beta(c_de, n_de, c_nu, n_nu, r_item, 0.0).map_err(|e| e.to_string())?;
        let sum = r_item + t_d;
        // the unclamped sum is compared at the scale of its terms
        let scale = mle.abs().max(r_item.abs());
        ensure(sum == mle || rel_err(sum, mle, scale) <= tol, || {
            format!("case {case}: r_item + t_d = {sum}, r_mle = {mle}")
        })?;
        ensure(clamp_sum(r_item, t_d) >= 0.0, || "negative clamp".into())?;

        let lambda_d = 10f64.powf(rng.gen_range(-9.0..0.0));
        let t0 = dependency_beta(0, n_de, 0, n_nu, r_item, lambda_d).map_err(|e| e.to_string())?;
        ensure(t0 == 0.0, || format!("case {case}: unobserved t_d = {t0}"))?;
    }
    Ok(format!("{cases} random cases for each identity"))
}

fn all_docs(seed: u64, n_docs: usize) -> Result<Vec<Document>, String> {
    let plants = [
        PlantedContext::new(&["said", "Mr."], "PER", 0.9).map_err(|e| e.to_string())?,
        PlantedContext::new(&["visited"], "LOC", 0.8).map_err(|e| e.to_string())?,
    ];
    let splits = generate_synthetic(seed, 400, n_docs, &plants).map_err(|e| e.to_string())?;
    Ok([splits.train, splits.valid, splits.test].concat())
}

fn conservation() -> Check {
    let docs = all_docs(7, 100)?;
    ensure(docs.len() == 100, || format!("{} documents", docs.len()))?;
    let filter = EntityTypeFilter::new("PER").unwrap();
    for order in 1..=4 {
        let model = build_model(&docs, order, &filter).map_err(|e| e.to_string())?;
        let windows: u64 = docs
            .iter()
            .map(|d| d.len().saturating_sub(order - 1) as u64)
            .sum();
        ensure(model.n_de() == windows, || {
            format!("order {order}: n_de {} vs {windows} windows", model.n_de())
        })?;
        ensure(
            model.n_de() == model.de_counts().values().sum::<u64>(),
            || format!("order {order}: n_de"),
        )?;
        ensure(
            model.n_nu() == model.nu_counts().values().sum::<u64>(),
            || format!("order {order}: n_nu"),
        )?;
        for k in 1..=order {
            let de: u64 = model
                .de_unit_counts()
                .iter()
                .filter(|(u, _)| u.position == k)
                .map(|(_, c)| c)
                .sum();
            let nu: u64 = model
                .nu_unit_counts()
                .iter()
                .filter(|(u, _)| u.position == k)
                .map(|(_, c)| c)
                .sum();
            ensure(de == model.n_de() && nu == model.n_nu(), || {
                format!("order {order}, position {k}: unit sums {de}/{nu}")
            })?;
        }
        let sequential = model.to_text();
        for shards in [1, 2, 3, 7, 16, 100] {
            let parallel =
                build_model_parallel(&docs, order, &filter, shards).map_err(|e| e.to_string())?;
            ensure(parallel.to_text() == sequential, || {
                format!("order {order}: {shards} shards differ")
            })?;
        }
    }
    Ok(
        "100 documents, orders 1-4, totals and unit sums conserved, 6 shard counts byte-identical"
            .into(),
    )
}

fn twenty_type_model() -> Result<FrequencyModel, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let types: Vec<Token> = (0..20)
        .map(|i| Token::new(format!("t{i:02}")).unwrap())
        .collect();
    let docs: Vec<Document> = (0..30)
        .map(|_| {
            let len = rng.gen_range(20..60);
            let tokens: Vec<Token> = (0..len)
                .map(|_| types[rng.gen_range(0..20)].clone())
                .collect();
            let mut spans = Vec::new();
            let mut pos = 3;
            while pos + 1 < len {
                spans.push(EntitySpan {
                    start: pos,
                    end: pos + 1,
                    label: "PER".into(),
                });
                pos += rng.gen_range(3..9);
            }
            Document::new(tokens, spans).unwrap()
        })
        .collect();
    build_model(&docs, 3, &EntityTypeFilter::new("PER").unwrap()).map_err(|e| e.to_string())
}

fn kn_normalization() -> Check {
    let model = twenty_type_model()?;
    let vocab: Vec<Token> = model.vocab().iter().cloned().collect();
    ensure(vocab.len() == 20, || format!("{} types", vocab.len()))?;
    let mut contexts: BTreeSet<Vec<Token>> = BTreeSet::new();
    for w in model.de_counts().keys().chain(model.nu_counts().keys()) {
        for m in 0..w.order() {
            contexts.insert(w.items()[..m].to_vec());
        }
    }
    // contexts never observed on either side
    contexts.insert(vec![vocab[0].clone(), vocab[0].clone()]);
    contexts.insert(vec![vocab[19].clone()]);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for side in [Side::De, Side::Nu] {
        for ctx in &contexts {
            for &d in &DISCOUNT_GRID {
                let mut total = 0.0;
                for item in &vocab {
                    total +=
                        kn_conditional(&model, item, ctx, d, side).map_err(|e| e.to_string())?;
                }
                worst = worst.max((total - 1.0).abs());
                checked += 1;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("worst |sum - 1| = {worst:e}"))?;

    let (de, nu) = check_tune_kn(&model)?;
    let zipf = build_model(
        &all_docs(9, 100)?,
        2,
        &EntityTypeFilter::new("PER").unwrap(),
    )
    .map_err(|e| e.to_string())?;
    let (zde, znu) = check_tune_kn(&zipf)?;
    Ok(format!(
        "{checked} conditionals over 20 types, worst |sum - 1| = {worst:.1e}; tuned discounts match exhaustive search (uniform corpus de {de:?} nu {nu:?}, Zipf corpus de {zde:?} nu {znu:?})"
    ))
}

/// Tunes the discounts and compares each against an exhaustive
/// recomputation of the training log-likelihood.
fn check_tune_kn(model: &FrequencyModel) -> Result<(Vec<f64>, Vec<f64>), String> {
    let outcome = tune_kn(model, &DISCOUNT_GRID).map_err(|e| e.to_string())?;
    for side in [Side::De, Side::Nu] {
        let counts = match side {
            Side::De => model.de_counts(),
            Side::Nu => model.nu_counts(),
        };
        for position in 1..=model.order() {
            let mut best = (f64::NAN, f64::NEG_INFINITY);
            for &d in &DISCOUNT_GRID {
                let mut ll = 0.0;
                for (w, &c) in counts {
                    let items = w.items();
                    let p = kn_conditional(
                        model,
                        &items[position - 1],
                        &items[..position - 1],
                        d,
                        side,
                    )
                    .map_err(|e| e.to_string())?;
                    ll += c as f64 * p.ln();
                }
                if ll > best.1 {
                    best = (d, ll);
                }
            }
            let picked = outcome.discounts.side(side)[position - 1];
            ensure(picked == best.0, || {
                format!(
                    "{side} position {position}: tuned {picked}, exhaustive {}",
                    best.0
                )
            })?;
        }
    }
    Ok((outcome.discounts.de, outcome.discounts.nu))
}

fn held_out_pairs() -> Vec<NGram> {
    let mut pairs = Vec::new();
    for (i, v) in VERBS.iter().enumerate() {
        for (j, t) in TITLES.iter().enumerate() {
            if pair_role(i, j) == PairRole::HeldOut {
                pairs.push(NGram::from_strs(&[v, t]).unwrap());
            }
        }
    }
    pairs
}

fn zero_frequency_seed(seed: u64, root: &Path) -> Result<String, String> {
    let err = |e: anyhow::Error| format!("seed {seed}: {e:#}");
    let mut base = RunConfig {
        seed,
        docs: 600,
        vocab_size: 3000,
        cutoff: 1000,
        out: root.join("data"),
        ..RunConfig::default()
    };
    let [train, valid, test] = cmd_generate(&base).map_err(err)?;
    base.train = Some(train);
    base.valid = Some(valid);
    base.test = Some(test.clone());
    base.out = root.to_path_buf();
    let model_path = cmd_count(&base).map_err(err)?.path;
    base.model = Some(model_path.clone());
    base.train = None;

    let model = FrequencyModel::from_text(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let test_docs = ngram_lr_cli::commands::read_corpus(&test).map_err(err)?;
    let relevant = ngram_lr::evaluation::truth_labels(
        &test_docs,
        &EntityTypeFilter::new("PER").unwrap(),
        2,
        1,
    );
    let unseen = held_out_pairs()
        .into_iter()
        .filter(|w| model.c_de(w) == 0 && model.c_nu(w) == 0 && relevant.contains(w))
        .count();
    ensure(unseen >= 20, || {
        format!("seed {seed}: only {unseen} planted contexts unseen in training")
    })?;

    let mut recall = BTreeMap::new();
    for kind in EstimatorKind::ALL {
        if kind == EstimatorKind::Kn {
            continue;
        }
        let mut config = base.clone();
        config.estimator = EstimatorConfig::new(kind);
        config.out = root.join(format!("tune_{kind}"));
        if kind != EstimatorKind::B {
            config.estimator = cmd_tune(&config).map_err(err)?.best;
        }
        config.out = root.join(format!("rank_{kind}"));
        let summary = cmd_rank(&config).map_err(err)?;
        recall.insert(kind.to_string(), summary.final_recall);
    }
    let (b, k, item, ours) = (recall["B"], recall["K"], recall["ITEM"], recall["OURS"]);
    ensure(
        item > b && item > k && ours > b && ours > k && ours >= item,
        || format!("seed {seed}: recall@1000 B {b:.3} K {k:.3} ITEM {item:.3} OURS {ours:.3}"),
    )?;
    Ok(format!(
        "seed {seed}: {unseen} unseen contexts, recall@1000 B {b:.3} K {k:.3} ITEM {item:.3} OURS {ours:.3}"
    ))
}

fn zero_frequency() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for seed in [11, 12, 13] {
        details.push(zero_frequency_seed(
            seed,
            &dir.path().join(seed.to_string()),
        )?);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{}; {secs:.1} s", details.join("; ")))
}

fn read_bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let err = |e: anyhow::Error| format!("{e:#}");
    let mut base = RunConfig {
        seed: 21,
        docs: 300,
        vocab_size: 2000,
        out: dir.path().join("data"),
        svg: true,
        ..RunConfig::default()
    };
    let [train, _, test] = cmd_generate(&base).map_err(err)?;
    base.train = Some(train);
    base.test = Some(test);
    let mut bundles = 0;
    for estimator in [
        EstimatorConfig::ours(1e-4, 1e-5),
        EstimatorConfig::new(EstimatorKind::B),
        EstimatorConfig::new(EstimatorKind::Kn),
    ] {
        let kind = estimator.kind;
        let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
        for (run, threads) in [1, 1, 2, 4, 0].into_iter().enumerate() {
            let config = RunConfig {
                estimator: estimator.clone(),
                threads,
                out: dir.path().join(format!("{kind}_{run}")),
                ..base.clone()
            };
            cmd_rank(&config).map_err(err)?;
            let bundle = read_bundle(&config.out);
            match &reference {
                None => reference = Some(bundle),
                Some(r) => ensure(r == &bundle, || {
                    format!("{kind}: run {run} ({threads} threads) differs")
                })?,
            }
            bundles += 1;
        }
    }
    Ok(format!(
        "{bundles} bundles over B, KN, OURS and 1/2/4/default threads are byte-identical"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact MLE on the joint-count example", exact_mle),
        (
            "exact itemized ratio on the unit-count example",
            exact_itemized,
        ),
        ("K regularization sweep", k_sweep),
        ("OURS regularization sweeps", ours_sweeps),
        (
            "closed-form dependency term vs brute-force grid",
            optimality_oracle,
        ),
        ("reduction identities", reduction_identities),
        ("counting conservation and parallel merge", conservation),
        ("KN normalization and discount tuning", kn_normalization),
        ("zero-frequency recall end to end", zero_frequency),
        ("deterministic rank bundles", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
