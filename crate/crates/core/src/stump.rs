//! Weighted decision-stump search: the column-generation subproblem.
//!
//! For weights `u` the search maximises the edge `Σ u_i y_i h(x_i)` over every
//! feature, every midpoint between consecutive distinct feature values (plus
//! the `±inf` sentinels) and both polarities.
//!
//! Ties resolve to the lowest feature index, then the lowest threshold, then
//! positive polarity. The scan always runs per feature and then merges the
//! per-feature winners in feature order, so the parallel and sequential paths
//! are the same computation.

use std::cmp::Ordering;
use std::ops::Deref;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Polarity, WeakHypothesis};
use crate::error::{check_len, input, Result};

/// Nonnegative sample weights (the dual variables `u`), not all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return input("weights must be finite and nonnegative");
        }
        if !values.iter().any(|&v| v > 0.0) {
            return input("weights must have at least one positive entry");
        }
        Ok(Self(values))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpChoice {
    pub hypothesis: WeakHypothesis,
    pub edge: f64,
    /// No feature takes more than one value, so only constant stumps exist.
    pub degenerate: bool,
}

/// `Σ_i u_i y_i h(x_i)`.
pub fn stump_edge(h: &WeakHypothesis, data: &Dataset, u: &[f64]) -> Result<f64> {
    check_len(data.len(), u.len(), "weights vs samples")?;
    if h.feature_index >= data.dim() {
        return input(format!("feature index {} out of range", h.feature_index));
    }
    Ok(data
        .samples()
        .iter()
        .zip(data.labels())
        .zip(u)
        .map(|((x, &y), &ui)| ui * f64::from(y) * h.predict(x))
        .sum())
}

/// One-shot search. For repeated searches over the same data use [`StumpLearner`].
pub fn best_stump(data: &Dataset, u: &WeightVector) -> Result<StumpChoice> {
    StumpLearner::new(data).best(data, u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpConfig {
    /// Fraction of features scanned per call; `None` scans all of them.
    pub feature_fraction: Option<f64>,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for StumpConfig {
    fn default() -> Self {
        Self {
            feature_fraction: None,
            seed: 0,
            parallel: true,
        }
    }
}

/// Caches the per-feature sort order of a dataset.
#[derive(Debug, Clone)]
pub struct StumpLearner {
    sorted: Vec<Vec<usize>>,
    config: StumpConfig,
    rng: ChaCha8Rng,
}

struct Candidate {
    threshold: f64,
    polarity: Polarity,
    edge: f64,
}

impl StumpLearner {
    pub fn new(data: &Dataset) -> Self {
        Self::with_config(data, StumpConfig::default())
    }

    pub fn with_config(data: &Dataset, config: StumpConfig) -> Self {
        let sorted = (0..data.dim())
            .map(|f| {
                let mut idx: Vec<usize> = (0..data.len()).collect();
                idx.sort_by(|&a, &b| {
                    data.sample(a)[f]
                        .partial_cmp(&data.sample(b)[f])
                        .unwrap_or(Ordering::Equal)
                });
                idx
            })
            .collect();
        Self {
            sorted,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        }
    }

    /// Best stump for sample weights `u`. Column generation passes raw dual
    /// values here, which may be signed; the edge is well defined either way.
    pub fn best(&mut self, data: &Dataset, u: &[f64]) -> Result<StumpChoice> {
        check_len(data.len(), u.len(), "weights vs samples")?;
        if u.iter().any(|v| !v.is_finite()) {
            return input("sample weights must be finite");
        }
        check_len(self.sorted.len(), data.dim(), "learner built for another dataset")?;
        let features: Vec<usize> = match self.config.feature_fraction {
            Some(frac) if frac > 0.0 && frac < 1.0 => {
                let k = ((data.dim() as f64 * frac).ceil() as usize).clamp(1, data.dim());
                let mut f = index::sample(&mut self.rng, data.dim(), k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..data.dim()).collect(),
        };

        let total: f64 = u.iter().zip(data.labels()).map(|(&w, &y)| w * f64::from(y)).sum();
        let scale: f64 = u.iter().map(|v| v.abs()).sum();
        let tol = 1e-12 * scale;

        let scan = |f: usize| self.scan_feature(data, u, f, total, tol);
        let per_feature: Vec<(Candidate, bool)> = if self.config.parallel && features.len() > 1 {
            features.par_iter().map(|&f| scan(f)).collect()
        } else {
            features.iter().map(|&f| scan(f)).collect()
        };

        let mut best: Option<(usize, Candidate)> = None;
        let mut degenerate = true;
        for (&f, (cand, single_valued)) in features.iter().zip(per_feature) {
            degenerate &= single_valued;
            let better = match &best {
                None => true,
                Some((_, b)) => cand.edge > b.edge + tol,
            };
            if better {
                best = Some((f, cand));
            }
        }
        let (feature, cand) = best.expect("at least one feature scanned");
        let hypothesis = WeakHypothesis::new(feature, cand.threshold, cand.polarity);
        let edge = stump_edge(&hypothesis, data, u)?;
        Ok(StumpChoice {
            hypothesis,
            edge,
            degenerate,
        })
    }

    /// Best candidate on one feature, and whether the feature is constant.
    fn scan_feature(&self, data: &Dataset, u: &[f64], f: usize, total: f64, tol: f64) -> (Candidate, bool) {
        let order = &self.sorted[f];
        let labels = data.labels();
        let value = |i: usize| data.sample(order[i])[f];

        // threshold -inf: everything is predicted `polarity`
        let mut best = Candidate {
            threshold: f64::NEG_INFINITY,
            polarity: Polarity::Positive,
            edge: total,
        };
        let offer = |threshold: f64, edge_pos: f64, best: &mut Candidate| {
            if edge_pos > best.edge + tol {
                *best = Candidate {
                    threshold,
                    polarity: Polarity::Positive,
                    edge: edge_pos,
                };
            }
            if -edge_pos > best.edge + tol {
                *best = Candidate {
                    threshold,
                    polarity: Polarity::Negative,
                    edge: -edge_pos,
                };
            }
        };
        offer(f64::NEG_INFINITY, total, &mut best);

        let mut below = 0.0;
        let mut single_valued = true;
        for k in 0..order.len() {
            let i = order[k];
            below += u[i] * f64::from(labels[i]);
            if k + 1 < order.len() {
                let (lo, hi) = (value(k), value(k + 1));
                if hi > lo {
                    single_valued = false;
                    offer(midpoint(lo, hi), total - 2.0 * below, &mut best);
                }
            }
        }
        offer(f64::INFINITY, -total, &mut best);
        (best, single_valued)
    }
}

/// Midpoint strictly above `lo` and at most `hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Every candidate stump on `data`, in tie-break order. Used by tests as an
/// exhaustive oracle.
pub fn enumerate_stumps(data: &Dataset) -> Vec<WeakHypothesis> {
    let mut out = Vec::new();
    for f in 0..data.dim() {
        let mut vals: Vec<f64> = data.samples().iter().map(|x| x[f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let mut thresholds = vec![f64::NEG_INFINITY];
        thresholds.extend(vals.windows(2).map(|w| midpoint(w[0], w[1])));
        thresholds.push(f64::INFINITY);
        for t in thresholds {
            out.push(WeakHypothesis::new(f, t, Polarity::Positive));
            out.push(WeakHypothesis::new(f, t, Polarity::Negative));
        }
    }
    out
}
