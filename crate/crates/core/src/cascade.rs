//! Multi-exit cascades: every node reuses the weak classifiers of the nodes
//! before it and adds at least one of its own.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boost::{fit_offset, AdaBoost, BoostConfig, ColumnGeneration, OffsetFit};
use crate::data::{dot, Dataset, WeakHypothesis};
use crate::error::{input, Error, Result};
use crate::linear::{class_stats, lac_fit, lda_direction, response_rows};
use crate::mpm::normal_quantile;

/// One exit of the cascade. Its score uses the first `weak_count` shared
/// hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitNode {
    pub weak_count: usize,
    pub w: Vec<f64>,
    pub b: f64,
    /// Detection rate reached on the node's training positives.
    pub d: f64,
    /// False-positive rate reached on the node's training negatives.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDecision {
    pub label: i8,
    /// Node that rejected the sample, or the last node when it passed.
    pub exit_index: usize,
    pub features_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CascadeModel {
    pub hypotheses: Vec<WeakHypothesis>,
    pub nodes: Vec<ExitNode>,
}

impl CascadeModel {
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0;
        for (t, node) in self.nodes.iter().enumerate() {
            if node.w.len() != node.weak_count {
                return input(format!("node {t}: {} weights for {} weak classifiers", node.w.len(), node.weak_count));
            }
            if node.weak_count < prev || node.weak_count > self.hypotheses.len() {
                return input(format!("node {t}: weak count {} out of order", node.weak_count));
            }
            prev = node.weak_count;
        }
        Ok(())
    }

    pub fn total_weak(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.weak_count)
    }

    /// Evaluates weak classifiers only as far as the exit that decides.
    /// An empty cascade accepts everything.
    pub fn predict(&self, x: &[f64]) -> CascadeDecision {
        let mut responses = Vec::with_capacity(self.total_weak());
        for (t, node) in self.nodes.iter().enumerate() {
            while responses.len() < node.weak_count {
                responses.push(self.hypotheses[responses.len()].predict(x));
            }
            if node_score(node, &responses) < node.b {
                return CascadeDecision {
                    label: -1,
                    exit_index: t,
                    features_evaluated: responses.len(),
                };
            }
        }
        CascadeDecision {
            label: 1,
            exit_index: self.nodes.len().saturating_sub(1),
            features_evaluated: responses.len(),
        }
    }

    /// Every node's score minus its offset, computed from the full response
    /// vector.
    pub fn node_margins(&self, x: &[f64]) -> Vec<f64> {
        let responses: Vec<f64> = self.hypotheses[..self.total_weak()].iter().map(|h| h.predict(x)).collect();
        self.nodes.iter().map(|n| node_score(n, &responses) - n.b).collect()
    }

    /// Non-lazy counterpart of [`CascadeModel::predict`].
    pub fn predict_full(&self, x: &[f64]) -> (i8, usize) {
        let margins = self.node_margins(x);
        match margins.iter().position(|&s| s < 0.0) {
            Some(t) => (-1, t),
            None => (1, self.nodes.len().saturating_sub(1)),
        }
    }

    /// Real-valued score for ROC sweeps: the number of nodes passed plus a
    /// logistic squash of the margin at the deciding node. A sample is
    /// accepted exactly when its score is at least `nodes + 0.5`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let margins = self.node_margins(x);
        let passed = margins.iter().take_while(|&&s| s >= 0.0).count();
        let decider = margins.get(passed).or(margins.last()).copied().unwrap_or(0.0);
        passed as f64 + 1.0 / (1.0 + (-decider).exp())
    }

    pub fn mean_features(&self, samples: &[Vec<f64>]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let total: usize = samples.iter().map(|x| self.predict(x).features_evaluated).sum();
        total as f64 / samples.len() as f64
    }

    pub fn rates(&self) -> (f64, f64) {
        let d: Vec<f64> = self.nodes.iter().map(|n| n.d).collect();
        let f: Vec<f64> = self.nodes.iter().map(|n| n.f).collect();
        (d.iter().product(), f.iter().product())
    }
}

fn node_score(node: &ExitNode, responses: &[f64]) -> f64 {
    dot(&node.w, &responses[..node.weak_count])
}

/// `(∏ d_t, ∏ f_t)`.
pub fn cascade_rates(d: &[f64], f: &[f64]) -> Result<(f64, f64)> {
    for &v in d.iter().chain(f) {
        if !(v > 0.0 && v <= 1.0) {
            return input(format!("node rate {v} outside (0, 1]"));
        }
    }
    Ok((d.iter().product(), f.iter().product()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeGoal {
    pub d_min: f64,
    pub f_max: f64,
    /// Overall false-positive target.
    pub target_fp: f64,
}

impl CascadeGoal {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_min > 0.0 && self.d_min <= 1.0) {
            return input(format!("d_min must lie in (0, 1], got {}", self.d_min));
        }
        if !(self.f_max > 0.0 && self.f_max < 1.0) {
            return input(format!("f_max must lie in (0, 1), got {}", self.f_max));
        }
        if !(self.target_fp > 0.0 && self.target_fp < 1.0) {
            return input(format!("target_fp must lie in (0, 1), got {}", self.target_fp));
        }
        Ok(())
    }
}

/// Source of negative samples for bootstrapping.
pub trait NegativePool {
    /// `None` once the pool is exhausted.
    fn draw(&mut self) -> Option<Vec<f64>>;
}

/// Unlimited pool backed by a closure over a seeded generator.
pub struct GeneratorPool<F> {
    rng: ChaCha8Rng,
    sample: F,
}

impl<F: FnMut(&mut ChaCha8Rng) -> Vec<f64>> GeneratorPool<F> {
    pub fn new(seed: u64, sample: F) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sample,
        }
    }
}

impl<F: FnMut(&mut ChaCha8Rng) -> Vec<f64>> NegativePool for GeneratorPool<F> {
    fn draw(&mut self) -> Option<Vec<f64>> {
        Some((self.sample)(&mut self.rng))
    }
}

/// A fixed set of negatives, read in order or sampled with replacement.
#[derive(Debug, Clone)]
pub struct FinitePool {
    samples: Vec<Vec<f64>>,
    next: usize,
    replacement: Option<ChaCha8Rng>,
}

impl FinitePool {
    pub fn new(samples: Vec<Vec<f64>>) -> Self {
        Self {
            samples,
            next: 0,
            replacement: None,
        }
    }

    pub fn with_replacement(samples: Vec<Vec<f64>>, seed: u64) -> Self {
        Self {
            samples,
            next: 0,
            replacement: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl NegativePool for FinitePool {
    fn draw(&mut self) -> Option<Vec<f64>> {
        if self.samples.is_empty() {
            return None;
        }
        match &mut self.replacement {
            Some(rng) => Some(self.samples[rng.random_range(0..self.samples.len())].clone()),
            None => {
                let x = self.samples.get(self.next).cloned();
                self.next += 1;
                x
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub samples: Vec<Vec<f64>>,
    pub attempts: usize,
    /// Fewer than `needed` samples were found.
    pub short: bool,
    pub pool_exhausted: bool,
}

/// Draws from `pool` until `needed` false positives of `model` are found or
/// `cap` draws have been made.
pub fn bootstrap(model: &CascadeModel, pool: &mut dyn NegativePool, needed: usize, cap: usize) -> Result<Bootstrap> {
    if needed == 0 {
        return input("bootstrap needs at least one sample");
    }
    let mut out = Bootstrap {
        samples: Vec::with_capacity(needed),
        attempts: 0,
        short: false,
        pool_exhausted: false,
    };
    while out.samples.len() < needed && out.attempts < cap {
        let Some(x) = pool.draw() else {
            out.pool_exhausted = true;
            break;
        };
        out.attempts += 1;
        if model.predict(&x).label == 1 {
            out.samples.push(x);
        }
    }
    out.short = out.samples.len() < needed;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PostMethod {
    Lac,
    /// `C_w = (m1/m)Σ₁ + δ(m2/m)Σ₂`.
    Lda { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostProcess {
    pub method: PostMethod,
    /// First node (0-based) whose coefficients are replaced.
    pub from_node: usize,
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeConfig {
    pub boost: BoostConfig,
    /// Leading nodes trained by continuing AdaBoost.
    pub adaboost_nodes: usize,
    pub post_process: Option<PostProcess>,
    pub max_nodes: usize,
    pub max_weak_per_node: usize,
    /// Size of each node's negative training set.
    pub negatives_per_node: usize,
    /// Pool draws allowed per bootstrap.
    pub bootstrap_cap: usize,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            boost: BoostConfig::default(),
            adaboost_nodes: 2,
            post_process: None,
            max_nodes: 20,
            max_weak_per_node: 80,
            negatives_per_node: 1000,
            bootstrap_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeStop {
    TargetReached,
    MaxNodes,
    /// A node could not reach `d_min`; it is not part of the model.
    NodeFailed { node: usize, cap_reached: bool },
    /// The pool ran dry or hit the draw cap before a node could be trained.
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    pub model: CascadeModel,
    pub stop: CascadeStop,
    /// Negatives each node was trained on.
    pub node_negatives: Vec<usize>,
    pub bootstrap_attempts: Vec<usize>,
}

enum Booster<'a> {
    Ada(AdaBoost<'a>),
    Cg(ColumnGeneration<'a>),
}

struct NodeFit {
    w: Vec<f64>,
    fit: OffsetFit,
}

fn evaluate_node(
    data: &Dataset,
    hypotheses: &[WeakHypothesis],
    boosted: Vec<f64>,
    goal: &CascadeGoal,
    post: Option<PostProcess>,
) -> Result<NodeFit> {
    let w = match post {
        Some(p) => {
            let pos = response_rows(hypotheses, data.positives());
            let neg = response_rows(hypotheses, data.negatives());
            let stats = class_stats(&pos, &neg)?;
            match p.method {
                PostMethod::Lac => lac_fit(&stats, p.jitter)?.w,
                PostMethod::Lda { delta } => {
                    let m = data.len() as f64;
                    let weights = (data.m1() as f64 / m, data.m2() as f64 / m);
                    lda_direction(&stats, delta, weights, p.jitter)?.0
                }
            }
        }
        None => boosted,
    };
    let scores: Vec<f64> = data
        .samples()
        .iter()
        .map(|x| hypotheses.iter().zip(&w).map(|(h, wj)| wj * h.predict(x)).sum())
        .collect();
    let fit = fit_offset(&scores, data.labels(), goal.f_max)?;
    Ok(NodeFit { w, fit })
}

/// Trains a multi-exit cascade. Positives stay fixed; after each node the
/// negatives it rejects are dropped and the set is refilled with false
/// positives of the cascade so far.
pub fn train_cascade(
    positives: &[Vec<f64>],
    pool: &mut dyn NegativePool,
    goal: &CascadeGoal,
    cfg: &CascadeConfig,
) -> Result<CascadeOutcome> {
    goal.validate()?;
    cfg.boost.validate()?;
    if cfg.max_nodes == 0 || cfg.max_weak_per_node == 0 || cfg.negatives_per_node < 2 {
        return input("cascade limits must be positive and allow at least 2 negatives per node");
    }
    let mut boost_cfg = cfg.boost;
    boost_cfg.max_weak = usize::MAX;

    let mut model = CascadeModel::default();
    let mut alphas: Vec<f64> = Vec::new();
    let mut negatives: Vec<Vec<f64>> = Vec::new();
    let mut node_negatives = Vec::new();
    let mut bootstrap_attempts = Vec::new();

    let stop = loop {
        if model.nodes.len() >= cfg.max_nodes {
            break CascadeStop::MaxNodes;
        }
        let t = model.nodes.len();
        let needed = cfg.negatives_per_node.saturating_sub(negatives.len());
        if needed > 0 {
            let refill = bootstrap(&model, pool, needed, cfg.bootstrap_cap)?;
            bootstrap_attempts.push(refill.attempts);
            negatives.extend(refill.samples);
            if refill.short {
                debug!("node {t}: bootstrap found {} negatives after {} draws", negatives.len(), refill.attempts);
            }
        } else {
            bootstrap_attempts.push(0);
        }
        if negatives.len() < 2 {
            bootstrap_attempts.pop();
            break CascadeStop::PoolExhausted;
        }
        let data = Dataset::from_classes(positives.to_vec(), negatives.clone())?;
        let post = cfg.post_process.filter(|p| t >= p.from_node);
        let use_ada = t < cfg.adaboost_nodes && alphas.len() == model.hypotheses.len();

        let mut booster = if use_ada {
            Booster::Ada(AdaBoost::with_ensemble(&data, cfg.boost.stump, &model.hypotheses, &alphas))
        } else {
            Booster::Cg(ColumnGeneration::with_hypotheses(&data, boost_cfg, &model.hypotheses)?)
        };

        let mut added = 0;
        let mut best_d = 0.0f64;
        let node = loop {
            if added >= cfg.max_weak_per_node {
                break Err(true);
            }
            let (hyps, boosted, exhausted) = match &mut booster {
                Booster::Ada(ada) => {
                    let stop = ada.round()?;
                    if ada.hypotheses().len() == model.hypotheses.len() + added {
                        // nothing was added
                        break Err(false);
                    }
                    (ada.hypotheses().to_vec(), ada.model().w, stop.is_some())
                }
                Booster::Cg(cg) => {
                    let choice = cg.price()?;
                    let converged = cg.n() > 0 && choice.edge < cg.duals().r + boost_cfg.epsilon;
                    cg.add_column(choice.hypothesis, choice.edge)?;
                    (cg.response_matrix().hypotheses().to_vec(), cg.weights().to_vec(), converged)
                }
            };
            added += 1;
            let nf = evaluate_node(&data, &hyps, boosted, goal, post)?;
            best_d = best_d.max(nf.fit.detection_rate);
            if nf.fit.detection_rate >= goal.d_min {
                break Ok((hyps, nf));
            }
            if exhausted {
                break Err(false);
            }
        };

        match node {
            Ok((hyps, nf)) => {
                if let Booster::Ada(ada) = &booster {
                    alphas = ada.alphas().to_vec();
                }
                info!(
                    "node {t}: {} weak, d = {:.4}, f = {:.4}, {} negatives",
                    hyps.len(),
                    nf.fit.detection_rate,
                    nf.fit.false_positive_rate,
                    negatives.len()
                );
                node_negatives.push(negatives.len());
                model.nodes.push(ExitNode {
                    weak_count: hyps.len(),
                    w: nf.w,
                    b: nf.fit.b,
                    d: nf.fit.detection_rate,
                    f: nf.fit.false_positive_rate,
                });
                model.hypotheses = hyps;
            }
            Err(cap_reached) => {
                info!("node {t}: no weak classifier count reached d_min (best d = {best_d:.4} after {added})");
                bootstrap_attempts.pop();
                break CascadeStop::NodeFailed { node: t, cap_reached };
            }
        }

        let (_, f_total) = model.rates();
        if f_total <= goal.target_fp {
            break CascadeStop::TargetReached;
        }
        negatives.retain(|x| model.predict(x).label == 1);
    };
    model.validate()?;
    Ok(CascadeOutcome {
        model,
        stop,
        node_negatives,
        bootstrap_attempts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalityReport {
    /// `(normal quantile, standardised empirical quantile)` pairs.
    pub qq: Vec<(f64, f64)>,
    /// Pearson correlation of the pairs.
    pub r: f64,
}

/// Normal probability plot data for a set of margins.
pub fn margin_normality(margins: &[f64]) -> Result<NormalityReport> {
    let m = margins.len();
    if m < 20 {
        return input(format!("normality check needs at least 20 margins, got {m}"));
    }
    let mean = margins.iter().sum::<f64>() / m as f64;
    let var = margins.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    if !(var > 0.0) {
        return input("margins have zero variance");
    }
    let sd = var.sqrt();
    let mut z: Vec<f64> = margins.iter().map(|v| (v - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let qq = z
        .into_iter()
        .enumerate()
        .map(|(i, v)| Ok((normal_quantile((i as f64 + 0.5) / m as f64)?, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalityReport { r: pearson(&qq)?, qq })
}

fn pearson(pairs: &[(f64, f64)]) -> Result<f64> {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("correlation of a constant sequence".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
