//! Offset line search: pick `b` so that accepting `score >= b` keeps the
//! false-positive rate within budget while detecting as many positives as
//! possible.

use std::cmp::Ordering;

use crate::data::Label;
use crate::error::{check_len, input, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetFit {
    pub b: f64,
    pub detection_rate: f64,
    pub false_positive_rate: f64,
}

/// Candidates are `-inf`, midpoints of consecutive distinct scores and
/// `+inf`. Ties on detection rate resolve to the smallest `b`.
pub fn fit_offset(scores: &[f64], labels: &[Label], target_fp: f64) -> Result<OffsetFit> {
    check_len(scores.len(), labels.len(), "scores vs labels")?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return input("offset search needs both classes");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return input("scores must be finite");
    }
    let budget = target_fp * n_neg as f64 + 1e-9;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // ascending sweep: candidate k sits just below the k-th distinct value,
    // so everything from position `start` up is accepted
    let mut best: Option<(f64, usize, usize)> = None;
    let mut consider = |b: f64, pos_acc: usize, neg_acc: usize| {
        if neg_acc as f64 > budget {
            return;
        }
        // first feasible with strictly more detections wins; ascending b
        // order makes this the smallest b among ties
        if best.map_or(true, |(_, p, _)| pos_acc > p) {
            best = Some((b, pos_acc, neg_acc));
        }
    };

    let mut pos_above = n_pos;
    let mut neg_above = n_neg;
    consider(f64::NEG_INFINITY, pos_above, neg_above);
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] == 1 {
                pos_above -= 1;
            } else {
                neg_above -= 1;
            }
            i += 1;
        }
        if i < order.len() {
            let next = scores[order[i]];
            let mid = v + (next - v) / 2.0;
            let b = if mid > v { mid } else { next };
            consider(b, pos_above, neg_above);
        }
    }
    consider(f64::INFINITY, 0, 0);

    let (b, p, n) = best.expect("+inf always fits the budget");
    Ok(OffsetFit {
        b,
        detection_rate: p as f64 / n_pos as f64,
        false_positive_rate: n as f64 / n_neg as f64,
    })
}
