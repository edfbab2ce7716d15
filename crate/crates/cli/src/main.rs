use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;

use asymboost::boost::{adaboost_train, train, BoostModel};
use asymboost::cascade::margin_normality;
use asymboost::data::Dataset;
use asymboost::harness::config::Config;
use asymboost::harness::experiment::{
    evaluate_boost, evaluate_cascade, normality_trend, run_cascade, run_experiment, tune_offset, variant_name,
    ExperimentConfig,
};
use asymboost::harness::io::{read_dataset, read_table, write_dataset, write_table};
use asymboost::harness::model_io::{load_model, save_model, Model};
use asymboost::harness::roc::{roc, EvalReport};
use asymboost::linear::{class_stats, covariance_diagnostic, response_rows};

#[derive(Parser)]
#[command(name = "asymboost", version, about = "Asymmetric totally-corrective boosting and multi-exit cascades")]
struct Cli {
    /// Overrides the `seed` key of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic train.csv and test.csv.
    Synth,
    /// Train a boosted model on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Train the AdaBoost baseline instead of the configured variant.
        #[arg(long)]
        adaboost: bool,
    },
    /// Train a multi-exit cascade against a synthetic negative pool.
    TrainCascade,
    /// Evaluate a saved model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// ROC summary of a CSV with columns label, score.
    Roc {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Normal probability plot data of positive margins.
    DiagNormality {
        /// Without a model, reports AdaBoost margins for the round counts
        /// in `normality.weak`.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Diagonal against off-diagonal magnitude of the negative-class
    /// weak-classifier covariance.
    DiagCov {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Full comparison run, including any theta and delta sweeps.
    Sweep,
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        c.set("seed", s);
    }
    Ok(ExperimentConfig::from_config(&c)?)
}

fn print_report(name: &str, r: &EvalReport) {
    println!(
        "{name}: detection rate at 50% fp {:.4}, log-average {:.4}, mean features {:.2}",
        r.detection_rate_at_fp, r.log_average_rate, r.mean_features_per_window
    );
}

fn write_roc(out: &Path, r: &EvalReport) -> Result<()> {
    let rows: Vec<Vec<f64>> = r.roc_points.iter().map(|&(f, d)| vec![f, d]).collect();
    write_table(out.join("roc.csv"), &["fp_rate", "detection_rate"], &rows)?;
    Ok(())
}

fn boost_model(path: &Path) -> Result<BoostModel> {
    match load_model(path).with_context(|| format!("loading {}", path.display()))? {
        Model::Boost(m) => Ok(m),
        Model::Cascade(_) => bail!("{} holds a cascade, expected a boosted model", path.display()),
    }
}

fn load_data(path: &Path) -> Result<Dataset> {
    read_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = experiment_config(cli)?;
    match &cli.command {
        Command::Synth => {
            let (tr, te) = cfg.datasets()?;
            write_dataset(out.join("train.csv"), &tr)?;
            write_dataset(out.join("test.csv"), &te)?;
            println!("wrote {} training and {} test samples", tr.len(), te.len());
        }
        Command::Train { data, adaboost } => {
            let d = load_data(data)?;
            let (name, mut model) = if *adaboost {
                ("adaboost", adaboost_train(&d, cfg.adaboost_rounds, cfg.boost.stump)?.model)
            } else {
                let o = train(&d, &cfg.boost)?;
                info!("stopped after {} weak classifiers: {:?}", o.model.hypotheses.len(), o.stop);
                (variant_name(cfg.boost.variant), o.model)
            };
            tune_offset(&mut model, &d, cfg.target_fp)?;
            let path = out.join("model.txt");
            save_model(&Model::Boost(model.clone()), &path)?;
            println!("{name}: {} weak classifiers, offset {:.6}, saved to {}", model.hypotheses.len(), model.b, path.display());
        }
        Command::TrainCascade => {
            let run = run_cascade(&cfg, out)?;
            for (t, n) in run.outcome.model.nodes.iter().enumerate() {
                println!("node {t}: {} weak, d = {:.4}, f = {:.4}", n.weak_count, n.d, n.f);
            }
            println!("stopped: {:?}", run.outcome.stop);
            print_report("cascade", &run.eval);
        }
        Command::Eval { model, data } => {
            let d = load_data(data)?;
            let r = match load_model(model)? {
                Model::Boost(m) => evaluate_boost(&m, &d)?,
                Model::Cascade(c) => evaluate_cascade(&c, &d)?,
            };
            write_roc(out, &r)?;
            print_report("model", &r);
        }
        Command::Roc { scores } => {
            let (_, rows) = read_table(scores)?;
            let mut s = Vec::with_capacity(rows.len());
            let mut y = Vec::with_capacity(rows.len());
            for (i, r) in rows.iter().enumerate() {
                if r.len() != 2 || (r[0] != 1.0 && r[0] != -1.0) {
                    bail!("row {}: expected 'label, score' with label +1 or -1", i + 1);
                }
                y.push(r[0] as i8);
                s.push(r[1]);
            }
            let r = roc(&s, &y)?;
            write_roc(out, &r)?;
            print_report("scores", &r);
        }
        Command::DiagNormality { model, data } => match model {
            Some(m) => {
                let Some(data) = data else { bail!("--model needs --data") };
                let m = boost_model(m)?;
                let d = load_data(data)?;
                let rep = margin_normality(&m.scores(d.positives()))?;
                let rows: Vec<Vec<f64>> = rep.qq.iter().map(|&(a, b)| vec![a, b]).collect();
                write_table(out.join("qq.csv"), &["normal_quantile", "empirical"], &rows)?;
                println!("QQ correlation r = {:.5}", rep.r);
            }
            None => {
                let d = match data {
                    Some(p) => load_data(p)?,
                    None => cfg.datasets()?.0,
                };
                let trend = normality_trend(&d, &cfg.normality_weak, cfg.boost.stump)?;
                let rows: Vec<Vec<f64>> = trend.iter().map(|&(n, r)| vec![n as f64, r]).collect();
                write_table(out.join("normality.csv"), &["weak_count", "qq_r"], &rows)?;
                for (n, r) in trend {
                    println!("{n} weak classifiers: QQ correlation r = {r:.5}");
                }
            }
        },
        Command::DiagCov { model, data } => {
            let m = boost_model(model)?;
            let d = load_data(data)?;
            let rows = response_rows(&m.hypotheses, d.negatives());
            let s = class_stats(&rows, &rows)?;
            let diag = covariance_diagnostic(&s.sigma2)?;
            write_table(
                out.join("cov.csv"),
                &["diag_mean", "offdiag_mean", "ratio"],
                &[vec![diag.diag_mean, diag.offdiag_mean, diag.ratio]],
            )?;
            println!(
                "diagonal mean {:.5}, off-diagonal mean {:.5}, ratio {:.3}",
                diag.diag_mean, diag.offdiag_mean, diag.ratio
            );
        }
        Command::Sweep => {
            let rep = run_experiment(&cfg, out)?;
            for m in &rep.models {
                print_report(&m.name, &m.eval);
            }
            for (theta, r) in &rep.theta_sweep {
                print_report(&format!("theta {theta:.5}"), r);
            }
            for (delta, r) in &rep.delta_sweep {
                print_report(&format!("delta {delta}"), r);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
