//! Ranking and classification metrics for binary scorers.

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-15;

/// Scores paired with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                found: labels.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel { row });
        }
        if let Some(col) = scores.iter().position(|s| s.is_nan()) {
            return Err(Error::NonFiniteFeature { row: col, col: 0 });
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }
}

/// Area under the ROC curve as the normalized Mann-Whitney U statistic.
///
/// Tied scores share their average rank, which counts each tied
/// positive/negative pair as one half.
pub fn auc(set: &ScoredSet) -> Result<f64> {
    let n = set.len();
    let n_pos = set.positives();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.scores[a].total_cmp(&set.scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && set.scores[order[j]] == set.scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share their mean
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&r| set.labels[r] == 1).count();
        positive_rank_sum += mean_rank * tied_pos as f64;
        i = j;
    }
    let n_pos = n_pos as f64;
    let u = positive_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, recall and F1 when the top `ceil(fraction * n)` scores are called positive.
///
/// Ordering is by descending score; equal scores keep their original order.
pub fn prf_at_topk(set: &ScoredSet, fraction: f64) -> Result<PrecisionRecall> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "top-k fraction must lie in (0,1], got {fraction}"
        )));
    }
    let n = set.len();
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| match set.scores[b].total_cmp(&set.scores[a]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    let hits = order[..k].iter().filter(|&&i| set.labels[i] == 1).count() as f64;
    let positives = set.positives() as f64;
    let precision = hits / k as f64;
    let recall = if positives > 0.0 {
        hits / positives
    } else {
        0.0
    };
    Ok(PrecisionRecall {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

pub fn clamp_probability(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// Per-instance logistic loss with the probability clamped to `[eps, 1 - eps]`.
pub fn binary_cross_entropy(y: u8, p: f64, eps: f64) -> f64 {
    let p = clamp_probability(p, eps);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean logistic loss; scores are clamped to `[1e-15, 1 - 1e-15]` first.
pub fn logloss(set: &ScoredSet) -> f64 {
    logloss_with_eps(set, DEFAULT_EPSILON)
}

pub fn logloss_with_eps(set: &ScoredSet, eps: f64) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let total: f64 = set
        .scores
        .iter()
        .zip(&set.labels)
        .map(|(&s, &y)| binary_cross_entropy(y, s, eps))
        .sum();
    total / set.len() as f64
}
