//! End-to-end runs driven by a [`Config`]: generate or load data, train
//! AdaBoost and an asymmetric booster, evaluate, and write plot data.

use std::path::{Path, PathBuf};

use log::info;

use super::config::Config;
use super::io::{read_dataset, write_table};
use super::model_io::{save_model, Model};
use super::roc::{roc, EvalReport};
use super::synth::{generate, Gaussian, NegativeShape, Sampler, SyntheticSpec};
use crate::boost::{adaboost_train, fit_offset, train, BoostConfig, BoostModel, TrainTrace, Variant};
use crate::cascade::{margin_normality, train_cascade, CascadeConfig, CascadeGoal, CascadeOutcome, GeneratorPool, PostMethod, PostProcess};
use crate::data::Dataset;
use crate::error::{input, Error, Result};
use crate::linear::{class_stats, covariance_diagnostic, response_rows};
use crate::stump::StumpConfig;

/// Offset added to the seed for the test split of synthetic data.
pub const TEST_SEED_OFFSET: u64 = 1_000_003;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "data.kind",
    "data.dim",
    "data.n_pos",
    "data.n_neg",
    "data.test_pos",
    "data.test_neg",
    "data.pos_mean",
    "data.pos_cov",
    "data.neg_mean",
    "data.neg_cov",
    "data.radius",
    "data.radial_sd",
    "data.low",
    "data.high",
    "data.train",
    "data.test",
    "train.variant",
    "train.theta",
    "train.delta",
    "train.ridge",
    "train.epsilon",
    "train.max_weak",
    "train.rounds",
    "train.feature_fraction",
    "train.parallel",
    "eval.target_fp",
    "sweep.theta",
    "sweep.delta",
    "output.grid",
    "cascade.d_min",
    "cascade.f_max",
    "cascade.target_fp",
    "cascade.max_nodes",
    "cascade.max_weak_per_node",
    "cascade.negatives_per_node",
    "cascade.adaboost_nodes",
    "cascade.bootstrap_cap",
    "cascade.post",
    "cascade.post_delta",
    "cascade.post_from",
    "normality.weak",
];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { spec: SyntheticSpec, test_pos: usize, test_neg: usize },
    Files { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    pub boost: BoostConfig,
    pub adaboost_rounds: usize,
    /// False-positive rate used to set the offset of saved models.
    pub target_fp: f64,
    pub sweep_theta: Vec<f64>,
    pub sweep_delta: Vec<f64>,
    /// Points per axis of the decision-boundary grid; 0 disables it.
    pub grid: usize,
    pub goal: CascadeGoal,
    pub cascade: CascadeConfig,
    pub normality_weak: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let seed = 0;
        Self {
            seed,
            data: DataSource::Synthetic {
                spec: SyntheticSpec::toy(50, 500, seed),
                test_pos: 1000,
                test_neg: 10_000,
            },
            boost: BoostConfig::default(),
            adaboost_rounds: 100,
            target_fp: 0.5,
            sweep_theta: Vec::new(),
            sweep_delta: Vec::new(),
            grid: 0,
            goal: CascadeGoal {
                d_min: 0.99,
                f_max: 0.5,
                target_fp: 1e-3,
            },
            cascade: CascadeConfig::default(),
            normality_weak: vec![7, 52],
        }
    }
}

fn parse_variant(name: &str, delta: f64, ridge: f64) -> Result<Variant> {
    Ok(match name {
        "fisher" => Variant::Fisher,
        "lac" => Variant::Lac,
        "blend" => Variant::Blend(delta),
        "ridge" => Variant::Ridge(ridge),
        "custom" => Variant::Custom { delta, ridge },
        other => return input(format!("unknown variant '{other}'")),
    })
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Fisher => "fisher",
        Variant::Lac => "lac",
        Variant::Blend(_) => "blend",
        Variant::Ridge(_) => "ridge",
        Variant::Custom { .. } => "custom",
    }
}

fn synthetic_spec(c: &Config, seed: u64) -> Result<SyntheticSpec> {
    let dim = c.get_or("data.dim", 2usize)?;
    let mean = |key: &str| -> Result<Vec<f64>> {
        let m = c.get_list(key)?.unwrap_or_else(|| vec![0.0; dim]);
        if m.len() != dim {
            return input(format!("{key} has {} entries for dimension {dim}", m.len()));
        }
        Ok(m)
    };
    let cov = |key: &str| -> Result<Vec<Vec<f64>>> {
        Ok(c.get_matrix(key)?.unwrap_or_else(|| Gaussian::isotropic(vec![0.0; dim], 1.0).cov))
    };
    let positive = Gaussian {
        mean: mean("data.pos_mean")?,
        cov: cov("data.pos_cov")?,
    };
    let negative = match c.get_str("data.kind").unwrap_or("gaussian_vs_ring") {
        "gaussian_vs_ring" => NegativeShape::Ring {
            radius: c.get_or("data.radius", 2.0)?,
            radial_sd: c.get_or("data.radial_sd", 0.7)?,
        },
        "two_gaussians" => NegativeShape::Gaussian(Gaussian {
            mean: mean("data.neg_mean")?,
            cov: c
                .get_matrix("data.neg_cov")?
                .unwrap_or_else(|| Gaussian::isotropic(vec![0.0; dim], 4.0).cov),
        }),
        "gaussian_vs_uniform" => NegativeShape::Uniform {
            low: c.get_or("data.low", -4.0)?,
            high: c.get_or("data.high", 4.0)?,
        },
        other => return input(format!("unknown data.kind '{other}'")),
    };
    Ok(SyntheticSpec {
        positive,
        negative,
        n_pos: c.get_or("data.n_pos", 50)?,
        n_neg: c.get_or("data.n_neg", 500)?,
        seed,
    })
}

impl ExperimentConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        if let Some(k) = c.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return input(format!("unknown config key '{k}'"));
        }
        let d = Self::default();
        let seed = c.get_or("seed", d.seed)?;
        let data = match (c.get_str("data.train"), c.get_str("data.test")) {
            (Some(tr), Some(te)) => DataSource::Files {
                train: tr.into(),
                test: te.into(),
            },
            (None, None) => DataSource::Synthetic {
                spec: synthetic_spec(c, seed)?,
                test_pos: c.get_or("data.test_pos", 1000)?,
                test_neg: c.get_or("data.test_neg", 10_000)?,
            },
            _ => return input("data.train and data.test must be given together"),
        };
        let mut boost = d.boost;
        boost.theta = c.get_or("train.theta", boost.theta)?;
        boost.epsilon = c.get_or("train.epsilon", boost.epsilon)?;
        boost.max_weak = c.get_or("train.max_weak", boost.max_weak)?;
        boost.variant = parse_variant(
            c.get_str("train.variant").unwrap_or("fisher"),
            c.get_or("train.delta", 1.0)?,
            c.get_or("train.ridge", 1e-4)?,
        )?;
        boost.stump = StumpConfig {
            feature_fraction: c.get("train.feature_fraction")?,
            seed,
            parallel: c.get_or("train.parallel", true)?,
        };
        boost.validate()?;

        let goal = CascadeGoal {
            d_min: c.get_or("cascade.d_min", d.goal.d_min)?,
            f_max: c.get_or("cascade.f_max", d.goal.f_max)?,
            target_fp: c.get_or("cascade.target_fp", d.goal.target_fp)?,
        };
        goal.validate()?;
        let post_method = match c.get_str("cascade.post").unwrap_or("none") {
            "none" => None,
            "lac" => Some(PostMethod::Lac),
            "lda" => Some(PostMethod::Lda {
                delta: c.get_or("cascade.post_delta", 1.0)?,
            }),
            other => return input(format!("unknown cascade.post '{other}'")),
        };
        let dc = d.cascade;
        let cascade = CascadeConfig {
            boost,
            adaboost_nodes: c.get_or("cascade.adaboost_nodes", dc.adaboost_nodes)?,
            post_process: post_method.map(|method| -> Result<PostProcess> {
                Ok(PostProcess {
                    method,
                    from_node: c.get_or("cascade.post_from", 2)?,
                    jitter: 0.0,
                })
            }).transpose()?,
            max_nodes: c.get_or("cascade.max_nodes", dc.max_nodes)?,
            max_weak_per_node: c.get_or("cascade.max_weak_per_node", dc.max_weak_per_node)?,
            negatives_per_node: c.get_or("cascade.negatives_per_node", dc.negatives_per_node)?,
            bootstrap_cap: c.get_or("cascade.bootstrap_cap", dc.bootstrap_cap)?,
        };
        let normality_weak = match c.get_list("normality.weak")? {
            Some(v) => v.into_iter().map(|x| x as usize).collect(),
            None => d.normality_weak,
        };
        let target_fp = c.get_or("eval.target_fp", d.target_fp)?;
        if !(target_fp > 0.0 && target_fp < 1.0) {
            return input("eval.target_fp must lie in (0, 1)");
        }
        Ok(Self {
            seed,
            data,
            boost,
            adaboost_rounds: c.get_or("train.rounds", boost.max_weak)?,
            target_fp,
            sweep_theta: c.get_list("sweep.theta")?.unwrap_or_default(),
            sweep_delta: c.get_list("sweep.delta")?.unwrap_or_default(),
            grid: c.get_or("output.grid", d.grid)?,
            goal,
            cascade,
            normality_weak,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_config(&Config::load(path)?)
    }

    /// Training and test sets.
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        match &self.data {
            DataSource::Synthetic { spec, test_pos, test_neg } => Ok((
                generate(spec)?,
                generate(&spec.with_counts(*test_pos, *test_neg, spec.seed.wrapping_add(TEST_SEED_OFFSET)))?,
            )),
            DataSource::Files { train, test } => Ok((read_dataset(train)?, read_dataset(test)?)),
        }
    }
}

/// ROC evaluation of a boosted model on `data`.
pub fn evaluate_boost(model: &BoostModel, data: &Dataset) -> Result<EvalReport> {
    let mut r = roc(&model.scores(data.samples()), data.labels())?;
    r.mean_features_per_window = model.hypotheses.len() as f64;
    Ok(r)
}

pub fn evaluate_cascade(model: &crate::cascade::CascadeModel, data: &Dataset) -> Result<EvalReport> {
    let scores: Vec<f64> = data.samples().iter().map(|x| model.score(x)).collect();
    let mut r = roc(&scores, data.labels())?;
    r.mean_features_per_window = model.mean_features(data.samples());
    Ok(r)
}

/// Sets `b` so that at most `target_fp` of the training negatives pass.
pub fn tune_offset(model: &mut BoostModel, data: &Dataset, target_fp: f64) -> Result<()> {
    model.b = fit_offset(&model.scores(data.samples()), data.labels(), target_fp)?.b;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub name: String,
    pub model: BoostModel,
    pub eval: EvalReport,
    pub trace: Option<TrainTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub models: Vec<ModelReport>,
    pub theta_sweep: Vec<(f64, EvalReport)>,
    pub delta_sweep: Vec<(f64, EvalReport)>,
}

fn with_context(e: Error, ctx: &str) -> Error {
    match e {
        Error::Input(m) => Error::Input(format!("{ctx}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{ctx}: {m}")),
        Error::DegenerateClass(m) => Error::DegenerateClass(format!("{ctx}: {m}")),
        other => other,
    }
}

fn write_roc(dir: &Path, name: &str, r: &EvalReport) -> Result<()> {
    let rows: Vec<Vec<f64>> = r.roc_points.iter().map(|&(f, d)| vec![f, d]).collect();
    write_table(dir.join(format!("roc_{name}.csv")), &["fp_rate", "detection_rate"], &rows)
}

fn write_trace(dir: &Path, name: &str, t: &TrainTrace) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..t.objectives.len())
        .map(|k| {
            vec![
                (k + 1) as f64,
                t.objectives[k],
                t.edges[k],
                t.r[k],
                t.eg_iterations.get(k).copied().unwrap_or(0) as f64,
            ]
        })
        .collect();
    write_table(
        dir.join(format!("trace_{name}.csv")),
        &["iteration", "objective", "edge", "r", "eg_iterations"],
        &rows,
    )
}

/// QQ pairs of the positive test scores.
fn write_qq(dir: &Path, name: &str, model: &BoostModel, test: &Dataset) -> Result<f64> {
    let rep = margin_normality(&model.scores(test.positives()))?;
    let rows: Vec<Vec<f64>> = rep.qq.iter().map(|&(a, b)| vec![a, b]).collect();
    write_table(dir.join(format!("qq_{name}.csv")), &["normal_quantile", "empirical"], &rows)?;
    Ok(rep.r)
}

fn write_cov(dir: &Path, name: &str, model: &BoostModel, test: &Dataset) -> Result<()> {
    if model.hypotheses.len() < 2 {
        return Ok(());
    }
    let rows = response_rows(&model.hypotheses, test.negatives());
    let s = class_stats(&rows, &rows)?;
    let d = covariance_diagnostic(&s.sigma2)?;
    write_table(
        dir.join(format!("cov_{name}.csv")),
        &["diag_mean", "offdiag_mean", "ratio"],
        &[vec![d.diag_mean, d.offdiag_mean, d.ratio]],
    )
}

/// Scores over a regular grid spanning the training data.
pub fn boundary_grid(model: &BoostModel, data: &Dataset, n: usize) -> Result<Vec<Vec<f64>>> {
    if data.dim() != 2 || n < 2 {
        return input("boundary grid needs 2-D data and at least 2 points per axis");
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for x in data.samples() {
        for k in 0..2 {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
            let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
            let p = [x, y];
            rows.push(vec![x, y, model.score(&p) - model.b, f64::from(model.predict(&p))]);
        }
    }
    Ok(rows)
}

fn summary_lines(name: &str, r: &EvalReport) -> String {
    format!(
        "{name}.detection_rate_at_fp = {}\n{name}.log_average_rate = {}\n{name}.mean_features = {}\n",
        r.detection_rate_at_fp, r.log_average_rate, r.mean_features_per_window
    )
}

fn train_variant(train_d: &Dataset, boost: &BoostConfig, target_fp: f64) -> Result<(BoostModel, TrainTrace)> {
    let out = train(train_d, boost)?;
    let mut model = out.model;
    tune_offset(&mut model, train_d, target_fp)?;
    Ok((model, out.trace))
}

/// Runs the configured comparison and writes every artefact under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    std::fs::create_dir_all(out)?;
    let (train_d, test_d) = cfg.datasets()?;
    info!("training on {} samples, testing on {}", train_d.len(), test_d.len());

    let mut models = Vec::new();
    let ada = adaboost_train(&train_d, cfg.adaboost_rounds, cfg.boost.stump).map_err(|e| with_context(e, "adaboost"))?;
    let mut ada_model = ada.model;
    tune_offset(&mut ada_model, &train_d, cfg.target_fp)?;
    models.push(ModelReport {
        name: "adaboost".into(),
        eval: evaluate_boost(&ada_model, &test_d)?,
        model: ada_model,
        trace: None,
    });
    let name = variant_name(cfg.boost.variant);
    let (model, trace) = train_variant(&train_d, &cfg.boost, cfg.target_fp).map_err(|e| with_context(e, name))?;
    models.push(ModelReport {
        name: name.into(),
        eval: evaluate_boost(&model, &test_d)?,
        model,
        trace: Some(trace),
    });

    let mut summary = String::new();
    for m in &models {
        write_roc(out, &m.name, &m.eval)?;
        if let Some(t) = &m.trace {
            write_trace(out, &m.name, t)?;
        }
        let r = write_qq(out, &m.name, &m.model, &test_d)?;
        write_cov(out, &m.name, &m.model, &test_d)?;
        if cfg.grid > 0 && train_d.dim() == 2 {
            write_table(
                out.join(format!("boundary_{}.csv", m.name)),
                &["x", "y", "score", "label"],
                &boundary_grid(&m.model, &train_d, cfg.grid)?,
            )?;
        }
        save_model(&Model::Boost(m.model.clone()), out.join(format!("model_{}.txt", m.name)))?;
        summary.push_str(&summary_lines(&m.name, &m.eval));
        summary.push_str(&format!("{}.qq_r = {r}\n", m.name));
    }

    let mut theta_sweep = Vec::new();
    for &theta in &cfg.sweep_theta {
        let b = BoostConfig { theta, ..cfg.boost };
        let (m, _) = train_variant(&train_d, &b, cfg.target_fp).map_err(|e| with_context(e, &format!("theta {theta}")))?;
        theta_sweep.push((theta, evaluate_boost(&m, &test_d)?));
    }
    let mut delta_sweep = Vec::new();
    for &delta in &cfg.sweep_delta {
        let (_, ridge) = cfg.boost.variant.q_params();
        let b = BoostConfig {
            variant: Variant::Custom { delta, ridge },
            ..cfg.boost
        };
        let (m, _) = train_variant(&train_d, &b, cfg.target_fp).map_err(|e| with_context(e, &format!("delta {delta}")))?;
        delta_sweep.push((delta, evaluate_boost(&m, &test_d)?));
    }
    for (file, key, rows) in [("sweep_theta.csv", "theta", &theta_sweep), ("sweep_delta.csv", "delta", &delta_sweep)] {
        if rows.is_empty() {
            continue;
        }
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|(v, r)| vec![*v, r.detection_rate_at_fp, r.log_average_rate, r.mean_features_per_window])
            .collect();
        write_table(out.join(file), &[key, "detection_rate_at_fp", "log_average_rate", "weak_count"], &table)?;
    }
    std::fs::write(out.join("summary.txt"), summary)?;
    Ok(ExperimentReport {
        models,
        theta_sweep,
        delta_sweep,
    })
}

/// Positive-margin QQ correlation of AdaBoost after each listed number of
/// rounds.
pub fn normality_trend(data: &Dataset, rounds: &[usize], stump: StumpConfig) -> Result<Vec<(usize, f64)>> {
    rounds
        .iter()
        .map(|&n| {
            let m = adaboost_train(data, n, stump)?.model;
            let r = margin_normality(&m.scores(data.positives()))?.r;
            Ok((m.hypotheses.len(), r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeRun {
    pub outcome: CascadeOutcome,
    pub eval: EvalReport,
}

/// Trains a cascade on synthetic positives with an unlimited negative pool
/// drawn from the same specification.
pub fn run_cascade(cfg: &ExperimentConfig, out: &Path) -> Result<CascadeRun> {
    let DataSource::Synthetic { spec, test_pos, test_neg } = &cfg.data else {
        return input("cascade training needs a synthetic negative source");
    };
    std::fs::create_dir_all(out)?;
    let train_d = generate(spec)?;
    let sampler = Sampler::new(spec)?;
    let mut pool = GeneratorPool::new(spec.seed.wrapping_add(1), move |rng| sampler.negative(rng));
    let outcome = train_cascade(train_d.positives(), &mut pool, &cfg.goal, &cfg.cascade)?;
    let test_d = generate(&spec.with_counts(*test_pos, *test_neg, spec.seed.wrapping_add(TEST_SEED_OFFSET)))?;
    let eval = evaluate_cascade(&outcome.model, &test_d)?;
    save_model(&Model::Cascade(outcome.model.clone()), out.join("model_cascade.txt"))?;
    let nodes: Vec<Vec<f64>> = outcome
        .model
        .nodes
        .iter()
        .zip(&outcome.node_negatives)
        .enumerate()
        .map(|(t, (n, &neg))| vec![t as f64, n.weak_count as f64, n.b, n.d, n.f, neg as f64])
        .collect();
    write_table(out.join("cascade_nodes.csv"), &["node", "weak_count", "b", "d", "f", "negatives"], &nodes)?;
    write_roc(out, "cascade", &eval)?;
    let mut summary = summary_lines("cascade", &eval);
    summary.push_str(&format!("cascade.stop = {:?}\ncascade.nodes = {}\n", outcome.stop, outcome.model.nodes.len()));
    std::fs::write(out.join("summary.txt"), summary)?;
    Ok(CascadeRun { outcome, eval })
}
