//! Clustering and selection accuracy, enrichment testing and
//! median/quartile aggregation over repetitions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::ln_binomial;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} labels, got {got}")]
    TooFewLabels { needed: usize, got: usize },
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
}

fn pairs(count: u64) -> f64 {
    let c = count as f64;
    c * (c - 1.0) / 2.0
}

/// Adjusted Rand index from the contingency table of two labellings.
///
/// When both partitions are trivial in the same way the chance-corrected
/// denominator vanishes; that case returns 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(EvalError::TooFewLabels {
            needed: 2,
            got: a.len(),
        });
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_rows * sum_cols / pairs(a.len() as u64);
    let max = 0.5 * (sum_rows + sum_cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Fraction of truly relevant covariates that were selected, and of truly
/// irrelevant ones that were left out. An empty truth class scores 1.
pub fn selection_metrics(predicted: &[bool], truth: &[bool]) -> Result<(f64, f64), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    let (mut rel, mut rel_hit, mut irr, mut irr_hit) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        if t {
            rel += 1;
            rel_hit += usize::from(p);
        } else {
            irr += 1;
            irr_hit += usize::from(!p);
        }
    }
    let frac = |hit: usize, total: usize| {
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    };
    Ok((frac(rel_hit, rel), frac(irr_hit, irr)))
}

/// One-sided hypergeometric tail P(X >= `selected_in_set`) where X counts
/// members of a `set_size`-element set among `selected_total` draws from a
/// universe of `universe` items.
pub fn fisher_enrichment(
    selected_in_set: u64,
    set_size: u64,
    selected_total: u64,
    universe: u64,
) -> Result<f64, EvalError> {
    if set_size > universe || selected_total > universe {
        return Err(EvalError::InvalidCounts(format!(
            "set size {set_size} and draws {selected_total} must not exceed universe {universe}"
        )));
    }
    let upper = set_size.min(selected_total);
    if selected_in_set > upper {
        return Err(EvalError::InvalidCounts(format!(
            "overlap {selected_in_set} exceeds min(set size, draws) = {upper}"
        )));
    }
    let lower = selected_total.saturating_sub(universe - set_size);
    if selected_in_set <= lower {
        return Ok(1.0);
    }
    let ln_total = ln_binomial(universe, selected_total);
    let terms: Vec<f64> = (selected_in_set..=upper)
        .map(|x| {
            ln_binomial(set_size, x) + ln_binomial(universe - set_size, selected_total - x)
                - ln_total
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p = max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    Ok(p.min(1.0))
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median with lower and upper quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            lower: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            upper: quantile_sorted(&sorted, 0.75),
        })
    }
}

impl std::fmt::Display for Quartiles {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:.2} [{:.2}, {:.2}]",
            self.median, self.lower, self.upper
        )
    }
}

/// Metrics of one repetition. Truth-dependent metrics are absent when no
/// ground truth was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub seed: u64,
    pub ari: Option<f64>,
    pub relevant_prop: Option<f64>,
    pub irrelevant_prop: Option<f64>,
    pub runtime_seconds: f64,
    pub effective_k: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_elbo: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub records: Vec<RepetitionRecord>,
    pub ari: Option<Quartiles>,
    pub relevant_prop: Option<Quartiles>,
    pub irrelevant_prop: Option<Quartiles>,
    pub runtime_seconds: Option<Quartiles>,
    pub effective_k: Option<Quartiles>,
    pub failures: usize,
}

/// Median and quartiles of every metric across completed repetitions.
pub fn aggregate(records: Vec<RepetitionRecord>, failures: usize) -> RepetitionSummary {
    let collect = |f: &dyn Fn(&RepetitionRecord) -> Option<f64>| -> Option<Quartiles> {
        let values: Vec<f64> = records.iter().filter_map(f).collect();
        Quartiles::of(&values)
    };
    RepetitionSummary {
        ari: collect(&|r| r.ari),
        relevant_prop: collect(&|r| r.relevant_prop),
        irrelevant_prop: collect(&|r| r.irrelevant_prop),
        runtime_seconds: collect(&|r| Some(r.runtime_seconds)),
        effective_k: collect(&|r| Some(r.effective_k as f64)),
        failures,
        records,
    }
}
