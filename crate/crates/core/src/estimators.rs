//! Likelihood-ratio estimators `r(w) = p_nu(w) / p_de(w)` for N-grams.
//!
//! Every estimator is a closed-form function of a [`FrequencyModel`]:
//!
//! * `B`: ratio of maximum-likelihood estimates.
//! * `K`: discrete least-squares ratio fit with a ridge penalty, which
//!   shrinks only the denominator, `(c_de/n_de + λ)^-1 · c_nu/n_nu`.
//! * `ITEM`: product of `K` estimates over the N wildcard units.
//! * `OURS`: `ITEM` plus a per-N-gram dependency term fitted by the same
//!   regularized squared loss, clamped at zero.
//! * `KN`: ratio of two chain-rule Kneser–Ney probabilities.
//!
//! The count-level functions (`mle_ratio`, `regularized_ratio`, ...) are
//! exposed so that frequency tables can be evaluated without a corpus.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::corpus::Token;
use crate::counts::{itemize, FrequencyModel, KnTables, NGram};
use crate::error::{ArgumentError, EstimatorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    B,
    K,
    Kn,
    Item,
    Ours,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::B,
        EstimatorKind::K,
        EstimatorKind::Kn,
        EstimatorKind::Item,
        EstimatorKind::Ours,
    ];
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::B => "B",
            EstimatorKind::K => "K",
            EstimatorKind::Kn => "KN",
            EstimatorKind::Item => "ITEM",
            EstimatorKind::Ours => "OURS",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "B" => Ok(EstimatorKind::B),
            "K" => Ok(EstimatorKind::K),
            "KN" => Ok(EstimatorKind::Kn),
            "ITEM" => Ok(EstimatorKind::Item),
            "OURS" => Ok(EstimatorKind::Ours),
            _ => Err(ArgumentError::new(format!(
                "unknown estimator {s:?} (expected B, K, KN, ITEM or OURS)"
            ))),
        }
    }
}

/// Which sample a smoothed distribution is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    De,
    Nu,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::De => "de",
            Side::Nu => "nu",
        })
    }
}

/// One absolute discount per (position, side) conditional.
#[derive(Debug, Clone, PartialEq)]
pub struct KnDiscounts {
    pub de: Vec<f64>,
    pub nu: Vec<f64>,
}

impl KnDiscounts {
    pub fn uniform(order: usize, d: f64) -> Self {
        KnDiscounts {
            de: vec![d; order],
            nu: vec![d; order],
        }
    }

    pub fn side(&self, side: Side) -> &[f64] {
        match side {
            Side::De => &self.de,
            Side::Nu => &self.nu,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::De => &mut self.de,
            Side::Nu => &mut self.nu,
        }
    }
}

/// Estimator choice with its regularization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Ridge parameter of `K`.
    pub lambda: f64,
    /// Shared unit parameter of `ITEM` and `OURS`.
    pub lambda_item: f64,
    /// Optional per-position override of `lambda_item`.
    pub lambda_item_per_position: Option<Vec<f64>>,
    /// Dependency-term parameter of `OURS`.
    pub lambda_d: f64,
    pub kn_discounts: Option<KnDiscounts>,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorConfig {
            kind,
            lambda: 0.0,
            lambda_item: 0.0,
            lambda_item_per_position: None,
            lambda_d: 0.0,
            kn_discounts: None,
        }
    }

    pub fn k(lambda: f64) -> Self {
        EstimatorConfig {
            lambda,
            ..Self::new(EstimatorKind::K)
        }
    }

    pub fn item(lambda_item: f64) -> Self {
        EstimatorConfig {
            lambda_item,
            ..Self::new(EstimatorKind::Item)
        }
    }

    pub fn ours(lambda_item: f64, lambda_d: f64) -> Self {
        EstimatorConfig {
            lambda_item,
            lambda_d,
            ..Self::new(EstimatorKind::Ours)
        }
    }

    pub fn kn(discounts: KnDiscounts) -> Self {
        EstimatorConfig {
            kn_discounts: Some(discounts),
            ..Self::new(EstimatorKind::Kn)
        }
    }

    pub fn validate(&self, order: usize) -> Result<(), EstimatorError> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(EstimatorError::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        check("lambda", self.lambda)?;
        check("lambda_item", self.lambda_item)?;
        check("lambda_d", self.lambda_d)?;
        if let Some(per) = &self.lambda_item_per_position {
            if per.len() != order {
                return Err(EstimatorError::InvalidParameter(format!(
                    "{} per-position lambda_item values for order {order}",
                    per.len()
                )));
            }
            for &v in per {
                check("lambda_item", v)?;
            }
        }
        if let Some(d) = &self.kn_discounts {
            for side in [Side::De, Side::Nu] {
                let values = d.side(side);
                if values.len() != order {
                    return Err(EstimatorError::InvalidParameter(format!(
                        "{} {side} discounts for order {order}",
                        values.len()
                    )));
                }
                if values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                    return Err(EstimatorError::InvalidParameter(
                        "discounts must lie strictly inside (0, 1)".into(),
                    ));
                }
            }
        } else if self.kind == EstimatorKind::Kn {
            return Err(EstimatorError::InvalidParameter(
                "KN needs discounts".into(),
            ));
        }
        Ok(())
    }

    fn lambda_item_at(&self, position: usize) -> f64 {
        self.lambda_item_per_position
            .as_ref()
            .map_or(self.lambda_item, |per| per[position - 1])
    }
}

/// Estimated ratio on the extended non-negative reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateValue {
    Finite(f64),
    /// `c_de(w) = 0` with `c_nu(w) > 0` under `B`.
    Infinity,
    /// `c_de(w) = c_nu(w) = 0` under `B`.
    Undefined,
    /// KN could not score an item missing from the vocabulary.
    OutOfVocabulary,
}

impl EstimateValue {
    /// Ranking order: infinity first, finite values descending, then the
    /// unscorable markers.
    pub fn rank_cmp(&self, other: &EstimateValue) -> Ordering {
        fn tier(v: &EstimateValue) -> u8 {
            match v {
                EstimateValue::Infinity => 0,
                EstimateValue::Finite(_) => 1,
                EstimateValue::Undefined | EstimateValue::OutOfVocabulary => 2,
            }
        }
        match (self, other) {
            (EstimateValue::Finite(a), EstimateValue::Finite(b)) => b.total_cmp(a),
            _ => tier(self).cmp(&tier(other)),
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            EstimateValue::Finite(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for EstimateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateValue::Finite(v) => write!(f, "{v:e}"),
            EstimateValue::Infinity => f.write_str("inf"),
            EstimateValue::Undefined => f.write_str("undefined"),
            EstimateValue::OutOfVocabulary => f.write_str("oov"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OursParts {
    pub r_item: f64,
    pub t_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: EstimateValue,
    pub parts: Option<OursParts>,
}

impl Estimate {
    pub fn finite(v: f64) -> Self {
        Estimate {
            value: EstimateValue::Finite(v),
            parts: None,
        }
    }

    fn marker(value: EstimateValue) -> Self {
        Estimate { value, parts: None }
    }
}

/// Coefficient of the indicator basis for one N-gram; may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependencyTerm {
    pub beta: f64,
}

fn check_totals(n_de: u64, n_nu: u64) -> Result<(), EstimatorError> {
    if n_de == 0 || n_nu == 0 {
        return Err(EstimatorError::ZeroTotals { n_de, n_nu });
    }
    Ok(())
}

/// `(c_nu/n_nu) / (c_de/n_de)` with the infinity and undefined markers.
pub fn mle_ratio(
    c_de: u64,
    n_de: u64,
    c_nu: u64,
    n_nu: u64,
) -> Result<EstimateValue, EstimatorError> {
    check_totals(n_de, n_nu)?;
    Ok(match (c_de, c_nu) {
        (0, 0) => EstimateValue::Undefined,
        (0, _) => EstimateValue::Infinity,
        // n_de·c_nu / (n_nu·c_de) keeps integer-valued ratios exact
        _ => EstimateValue::Finite((n_de as f64 * c_nu as f64) / (n_nu as f64 * c_de as f64)),
    })
}

/// `(c_de/n_de + λ)^-1 · c_nu/n_nu`.
pub fn regularized_ratio(
    c_de: u64,
    n_de: u64,
    c_nu: u64,
    n_nu: u64,
    lambda: f64,
) -> Result<f64, EstimatorError> {
    check_totals(n_de, n_nu)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(EstimatorError::InvalidParameter(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        if c_de == 0 {
            return Err(EstimatorError::DivisionByZero(
                "c_de(w) = 0 with lambda = 0".into(),
            ));
        }
        return Ok((n_de as f64 * c_nu as f64) / (n_nu as f64 * c_de as f64));
    }
    let p_de = c_de as f64 / n_de as f64;
    let p_nu = c_nu as f64 / n_nu as f64;
    Ok(p_nu / (p_de + lambda))
}

/// Product of [`regularized_ratio`] over `(c_de, c_nu, λ)` unit triples.
pub fn itemized_ratio(
    units: &[(u64, u64, f64)],
    n_de: u64,
    n_nu: u64,
) -> Result<f64, EstimatorError> {
    check_totals(n_de, n_nu)?;
    let mut product = 1.0;
    for (k, &(c_de, c_nu, lambda)) in units.iter().enumerate() {
        product *= regularized_ratio(c_de, n_de, c_nu, n_nu, lambda).map_err(|e| match e {
            EstimatorError::DivisionByZero(_) => EstimatorError::DivisionByZero(format!(
                "unit {} has c_de = 0 with lambda_item = 0",
                k + 1
            )),
            other => other,
        })?;
    }
    Ok(product)
}

/// Minimizer of the regularized squared loss for the dependency coefficient:
/// `(c_de/n_de + λ_d)^-1 · (c_nu/n_nu − r_item · c_de/n_de)`.
pub fn dependency_beta(
    c_de: u64,
    n_de: u64,
    c_nu: u64,
    n_nu: u64,
    r_item: f64,
    lambda_d: f64,
) -> Result<f64, EstimatorError> {
    check_totals(n_de, n_nu)?;
    if !(lambda_d >= 0.0 && lambda_d.is_finite()) {
        return Err(EstimatorError::InvalidParameter(format!(
            "lambda_d must be finite and >= 0, got {lambda_d}"
        )));
    }
    if lambda_d == 0.0 && c_de == 0 {
        return Err(EstimatorError::DivisionByZero(
            "c_de(w) = 0 with lambda_d = 0; set lambda_d > 0".into(),
        ));
    }
    let p_de = c_de as f64 / n_de as f64;
    let p_nu = c_nu as f64 / n_nu as f64;
    if lambda_d == 0.0 {
        // algebraically r_mle − r_item; avoids the rounding of p_nu / p_de
        let r_mle = (n_de as f64 * c_nu as f64) / (n_nu as f64 * c_de as f64);
        return Ok(r_mle - r_item);
    }
    Ok((p_nu - r_item * p_de) / (p_de + lambda_d))
}

/// `max(0, r_item + t_d)`.
pub fn clamp_sum(r_item: f64, t_d: f64) -> f64 {
    (r_item + t_d).max(0.0)
}

/// Regularized squared-loss objective restricted to one N-gram's
/// coefficient `beta`:
/// `(β²/2 + r_item·β)·c_de/n_de − β·c_nu/n_nu + (λ_d/2)·β²`.
pub fn dependency_objective(
    c_de: u64,
    n_de: u64,
    c_nu: u64,
    n_nu: u64,
    beta: f64,
    r_item: f64,
    lambda_d: f64,
) -> f64 {
    let p_de = c_de as f64 / n_de as f64;
    let p_nu = c_nu as f64 / n_nu as f64;
    (0.5 * beta * beta + r_item * beta) * p_de - beta * p_nu + 0.5 * lambda_d * beta * beta
}

pub fn r_mle(model: &FrequencyModel, w: &NGram) -> Result<Estimate, EstimatorError> {
    let value = mle_ratio(model.c_de(w), model.n_de(), model.c_nu(w), model.n_nu())?;
    Ok(Estimate::marker(value))
}

pub fn r_k(model: &FrequencyModel, w: &NGram, lambda: f64) -> Result<Estimate, EstimatorError> {
    regularized_ratio(
        model.c_de(w),
        model.n_de(),
        model.c_nu(w),
        model.n_nu(),
        lambda,
    )
    .map(Estimate::finite)
}

fn unit_triples(
    model: &FrequencyModel,
    w: &NGram,
    lambdas: impl Fn(usize) -> f64,
) -> Vec<(u64, u64, f64)> {
    itemize(w)
        .iter()
        .map(|u| (model.unit_de(u), model.unit_nu(u), lambdas(u.position)))
        .collect()
}

pub fn r_item(
    model: &FrequencyModel,
    w: &NGram,
    lambda_item: f64,
) -> Result<Estimate, EstimatorError> {
    let units = unit_triples(model, w, |_| lambda_item);
    itemized_ratio(&units, model.n_de(), model.n_nu()).map(Estimate::finite)
}

/// Per-position variant of [`r_item`].
pub fn r_item_per_position(
    model: &FrequencyModel,
    w: &NGram,
    lambdas: &[f64],
) -> Result<Estimate, EstimatorError> {
    if lambdas.len() != w.order() {
        return Err(EstimatorError::InvalidParameter(format!(
            "{} lambda_item values for an order-{} N-gram",
            lambdas.len(),
            w.order()
        )));
    }
    let units = unit_triples(model, w, |k| lambdas[k - 1]);
    itemized_ratio(&units, model.n_de(), model.n_nu()).map(Estimate::finite)
}

/// Dependency coefficient given an itemized estimate `r_item_hat`.
pub fn t_d(
    model: &FrequencyModel,
    w: &NGram,
    r_item_hat: &Estimate,
    lambda_d: f64,
) -> Result<DependencyTerm, EstimatorError> {
    let r_item = r_item_hat.value.finite().ok_or_else(|| {
        EstimatorError::InvalidParameter("itemized estimate must be finite".into())
    })?;
    let beta = dependency_beta(
        model.c_de(w),
        model.n_de(),
        model.c_nu(w),
        model.n_nu(),
        r_item,
        lambda_d,
    )?;
    Ok(DependencyTerm { beta })
}

pub fn r_ours(
    model: &FrequencyModel,
    w: &NGram,
    lambda_item: f64,
    lambda_d: f64,
) -> Result<Estimate, EstimatorError> {
    let item = r_item(model, w, lambda_item)?;
    ours_from_item(model, w, item, lambda_d)
}

fn ours_from_item(
    model: &FrequencyModel,
    w: &NGram,
    item: Estimate,
    lambda_d: f64,
) -> Result<Estimate, EstimatorError> {
    let term = t_d(model, w, &item, lambda_d)?;
    let r_item = item.value.finite().unwrap_or(0.0);
    Ok(Estimate {
        value: EstimateValue::Finite(clamp_sum(r_item, term.beta)),
        parts: Some(OursParts {
            r_item,
            t_d: term.beta,
        }),
    })
}

fn kn_probability(
    factor: &crate::counts::KnFactor,
    level: usize,
    context: &[Token],
    item: &Token,
    d: f64,
    vocab_size: usize,
) -> f64 {
    if level == 0 {
        return 1.0 / vocab_size as f64;
    }
    let table = &factor.levels[level - 1];
    let ctx = &context[context.len() - (level - 1)..];
    let lower = kn_probability(factor, level - 1, context, item, d, vocab_size);
    let total = table.context_total(ctx);
    if total == 0 {
        return lower;
    }
    let mut key = ctx.to_vec();
    key.push(item.clone());
    let count = table.count(&key) as f64;
    let types = table.context_type_count(ctx) as f64;
    ((count - d).max(0.0) + d * types * lower) / total as f64
}

/// Interpolated Kneser–Ney conditional from precomputed tables:
/// `p(item | context)` for the item at position `context.len() + 1`.
pub fn kn_conditional_tables(
    tables: &KnTables,
    vocab_size: usize,
    item: &Token,
    context: &[Token],
    d: f64,
) -> Result<f64, EstimatorError> {
    if !(d > 0.0 && d < 1.0) {
        return Err(EstimatorError::InvalidParameter(format!(
            "discount {d} outside (0, 1)"
        )));
    }
    let position = context.len() + 1;
    if position > tables.factors.len() {
        return Err(EstimatorError::InvalidParameter(format!(
            "context of length {} exceeds model order {}",
            context.len(),
            tables.factors.len()
        )));
    }
    if vocab_size == 0 {
        return Err(EstimatorError::InvalidParameter("empty vocabulary".into()));
    }
    Ok(kn_probability(
        tables.factor(position),
        position,
        context,
        item,
        d,
        vocab_size,
    ))
}

pub fn kn_conditional(
    model: &FrequencyModel,
    item: &Token,
    context: &[Token],
    d: f64,
    side: Side,
) -> Result<f64, EstimatorError> {
    let tables = match side {
        Side::De => model.kn_de(),
        Side::Nu => model.kn_nu(),
    };
    kn_conditional_tables(tables, model.vocab().len(), item, context, d)
}

/// Chain-rule smoothed probability `Π_m p(a_m | a_1..a_{m-1})` of one side.
pub fn kn_chain(
    model: &FrequencyModel,
    w: &NGram,
    discounts: &[f64],
    side: Side,
) -> Result<f64, EstimatorError> {
    let items = w.items();
    let mut p = 1.0;
    for m in 0..items.len() {
        p *= kn_conditional(model, &items[m], &items[..m], discounts[m], side)?;
    }
    Ok(p)
}

pub fn r_kn(
    model: &FrequencyModel,
    w: &NGram,
    config: &EstimatorConfig,
) -> Result<Estimate, EstimatorError> {
    config.validate(model.order())?;
    if w.order() != model.order() {
        return Err(EstimatorError::InvalidParameter(format!(
            "N-gram order {} differs from model order {}",
            w.order(),
            model.order()
        )));
    }
    let discounts = config
        .kn_discounts
        .as_ref()
        .ok_or_else(|| EstimatorError::InvalidParameter("KN needs discounts".into()))?;
    if w.items().iter().any(|t| !model.vocab().contains(t)) {
        return Ok(Estimate::marker(EstimateValue::OutOfVocabulary));
    }
    let de = kn_chain(model, w, &discounts.de, Side::De)?;
    let nu = kn_chain(model, w, &discounts.nu, Side::Nu)?;
    Ok(Estimate::finite(nu / de))
}

/// Scores `w` with the configured estimator.
pub fn estimate(
    model: &FrequencyModel,
    w: &NGram,
    config: &EstimatorConfig,
) -> Result<Estimate, EstimatorError> {
    let itemized = || {
        let units = unit_triples(model, w, |k| config.lambda_item_at(k));
        itemized_ratio(&units, model.n_de(), model.n_nu()).map(Estimate::finite)
    };
    match config.kind {
        EstimatorKind::B => r_mle(model, w),
        EstimatorKind::K => r_k(model, w, config.lambda),
        EstimatorKind::Kn => r_kn(model, w, config),
        EstimatorKind::Item => itemized(),
        EstimatorKind::Ours => ours_from_item(model, w, itemized()?, config.lambda_d),
    }
}
