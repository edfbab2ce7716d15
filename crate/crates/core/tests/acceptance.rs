//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::path::Path;
use std::time::Instant;

use approx::relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use asymboost::boost::{build_q, train, BoostConfig, QSpec, Variant};
use asymboost::cascade::{cascade_rates, margin_normality, CascadeStop};
use asymboost::data::Dataset;
use asymboost::harness::config::Config;
use asymboost::harness::experiment::{normality_trend, run_cascade, run_experiment, ExperimentConfig};
use asymboost::harness::model_io::{model_from_str, model_to_string, Model};
use asymboost::harness::rng::{normal, seeded};
use asymboost::harness::synth::{generate, SyntheticSpec};
use asymboost::linear::{lac_fit, lac_objective, ClassStats};
use asymboost::mpm::{phi, phi_inverse, DistributionFamily};
use asymboost::simplex_qp::{eg_solve, oracle_solve, EgConfig, SimplexQp, Start};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: ts is a valid out-pointer for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime failed");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

fn experiment(text: &str) -> ExperimentConfig {
    let c: Config = text.parse().expect("config parses");
    ExperimentConfig::from_config(&c).expect("config is valid")
}

fn cascade_products() -> Check {
    let (d, f) = cascade_rates(&[0.997; 20], &[0.5; 20]).map_err(|e| e.to_string())?;
    // 0.997^20 expanded by the binomial series, summed exactly enough in f64
    let mut d_oracle = 0.0;
    let mut binom = 1.0;
    for k in 0..=20 {
        d_oracle += binom * (-0.003f64).powi(k);
        binom *= (20 - k) as f64 / (k + 1) as f64;
    }
    let f_oracle = 1.0 / 1_048_576.0;
    ensure(relative_eq!(d, d_oracle, max_relative = 1e-6), || format!("F_dr {d} vs {d_oracle}"))?;
    ensure(relative_eq!(f, f_oracle, max_relative = 1e-6), || format!("F_fp {f:e} vs {f_oracle:e}"))?;
    Ok(format!("F_dr = {d:.6}, F_fp = {f:.4e}"))
}

fn phi_family() -> Check {
    use DistributionFamily::*;
    let err = |e: asymboost::error::Error| e.to_string();
    ensure(phi(0.5, Gaussian).map_err(err)? == 0.0, || "phi(0.5, gaussian) is not exactly 0".into())?;
    for g in [0.55, 0.65, 0.75, 0.85, 0.95] {
        let v: Vec<f64> = [Arbitrary, Symmetric, SymmetricUnimodal, Gaussian]
            .iter()
            .map(|&fam| phi(g, fam))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        ensure(v.windows(2).all(|p| p[0] > p[1]), || format!("ordering fails at gamma {g}: {v:?}"))?;
    }
    let mut worst = 0.0f64;
    for fam in DistributionFamily::ALL {
        for i in 1..100 {
            let g = 0.5 + 0.5 * i as f64 / 100.0;
            let back = phi_inverse(phi(g, fam).map_err(err)?, fam).map_err(err)?;
            worst = worst.max((back - g).abs());
        }
    }
    ensure(worst <= 1e-10, || format!("round trip error {worst:e}"))?;
    Ok(format!("ordering holds at 5 levels, worst round trip {worst:.1e}"))
}

fn eg_vs_oracle() -> Check {
    let cfg = EgConfig {
        tolerance: 3e-11,
        max_iterations: 5_000_000,
        lipschitz_override: None,
    };
    let mut worst_obj = 0.0f64;
    let mut worst_w = 0.0f64;
    let mut slowest = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=20usize);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let qp = SimplexQp::new(m.transpose() * &m, c).map_err(|e| e.to_string())?;
        let t0 = thread_cpu_seconds();
        let eg = eg_solve(&qp, &Start::Uniform, &cfg).map_err(|e| e.to_string())?;
        let dt = thread_cpu_seconds() - t0;
        let or = oracle_solve(&qp);
        let dobj = (eg.objective - or.objective).abs();
        let dw = eg.w.iter().zip(&or.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(dobj <= 1e-6 && dw <= 1e-4 && dt < 1.0, || {
            format!("seed {seed} (n = {n}): objective gap {dobj:e}, weight gap {dw:e}, {dt:.3} s")
        })?;
        worst_obj = worst_obj.max(dobj);
        worst_w = worst_w.max(dw);
        slowest = slowest.max(dt);
    }
    // n = 2, P = diag(1, 4), c = 0: minimise w1² + 4w2² on the segment
    let qp = SimplexQp::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])), DVector::zeros(2))
        .map_err(|e| e.to_string())?;
    let eg = eg_solve(&qp, &Start::Uniform, &cfg).map_err(|e| e.to_string())?;
    ensure((eg.w[0] - 0.8).abs() <= 1e-4 && (eg.w[1] - 0.2).abs() <= 1e-4, || {
        format!("closed case gave {:?}", eg.w)
    })?;
    Ok(format!(
        "50 problems: max |dobj| {worst_obj:.1e}, max |dw| {worst_w:.1e}, slowest {slowest:.3} s CPU; closed case ({:.6}, {:.6})",
        eg.w[0], eg.w[1]
    ))
}

/// `max_h Σ_i u_i y_i h(x_i)` over every stump, by scanning each feature's
/// sorted values. Independent of the library's stump search.
fn max_edge(data: &Dataset, u: &[f64]) -> f64 {
    let uy: Vec<f64> = u.iter().zip(data.labels()).map(|(&ui, &y)| ui * f64::from(y)).collect();
    let total: f64 = uy.iter().sum();
    let mut best = total.abs();
    for j in 0..data.dim() {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.sample(a)[j].total_cmp(&data.sample(b)[j]));
        // below = Σ uy over samples with x < threshold
        let mut below = 0.0;
        let mut k = 0;
        while k < order.len() {
            let v = data.sample(order[k])[j];
            while k < order.len() && data.sample(order[k])[j] == v {
                below += uy[order[k]];
                k += 1;
            }
            let above = total - below;
            best = best.max((above - below).abs());
        }
    }
    best
}

fn column_generation() -> Check {
    let data = generate(&SyntheticSpec::toy(50, 500, 0)).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for (name, variant) in [("fisher", Variant::Fisher), ("lac", Variant::Lac)] {
        let cfg = BoostConfig {
            variant,
            max_weak: 100,
            ..BoostConfig::default()
        };
        let t0 = Instant::now();
        let out = train(&data, &cfg).map_err(|e| e.to_string())?;
        let secs = t0.elapsed().as_secs_f64();
        let objs = &out.trace.objectives;
        if let Some(i) = objs.windows(2).position(|w| w[1] > w[0] + 1e-8) {
            return Err(format!("{name}: objective rises at column {}: {} -> {}", i + 2, objs[i], objs[i + 1]));
        }
        let edge = max_edge(&data, &out.duals.u);
        let feasible = edge <= out.duals.r + cfg.epsilon;
        ensure(secs < 30.0, || format!("{name}: {secs:.1} s"))?;
        ensure(feasible, || {
            format!("{name}: stopped as {:?} with max edge {edge:.3e} > r + eps = {:.3e}", out.stop, out.duals.r + cfg.epsilon)
        })?;
        parts.push(format!(
            "{name}: {} columns, {:?}, max edge - r = {:.1e}, {secs:.1} s",
            objs.len(),
            out.stop,
            edge - out.duals.r
        ));
    }
    Ok(parts.join("; "))
}

fn duality_gap() -> Check {
    let ridge = 1e-4;
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let m1 = rng.random_range(10..=40usize);
        let m2 = rng.random_range(40..=160usize);
        let data = generate(&SyntheticSpec::toy(m1, m2, seed)).map_err(|e| e.to_string())?;
        let theta = 0.1;
        let cfg = BoostConfig {
            variant: Variant::Ridge(ridge),
            theta,
            epsilon: 1e-7,
            max_weak: 50,
            eg: EgConfig {
                tolerance: 1e-12,
                max_iterations: 2_000_000,
                lipschitz_override: None,
            },
            ..BoostConfig::default()
        };
        let out = train(&data, &cfg).map_err(|e| e.to_string())?;
        ensure(out.converged(), || format!("seed {seed}: stopped as {:?}", out.stop))?;

        let m = data.len();
        let q = build_q(&QSpec::new(data.m1(), data.m2(), 0.0, ridge).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let e = DVector::from_fn(m, |i, _| if data.labels()[i] == 1 { 1.0 / data.m1() as f64 } else { 1.0 / data.m2() as f64 });
        let rho = DVector::from_vec(out.model.scores(data.samples()).iter().zip(data.labels()).map(|(s, &y)| s * f64::from(y)).collect());
        let primal = 0.5 * rho.dot(&(&q * &rho)) - theta * e.dot(&rho);
        let u = -(&q * &rho) + &e * theta;
        let z = &e * theta - &u;
        let chol = q.clone().cholesky().ok_or("Q with ridge is not positive definite")?;
        let dual = -0.5 * z.dot(&chol.solve(&z)) - max_edge(&data, u.as_slice());
        let gap = (primal - dual).abs();
        ensure(gap <= 1e-5, || format!("seed {seed}: primal {primal:.9} dual {dual:.9} gap {gap:e}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("10 instances, largest |primal - dual| = {worst:.2e}"))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.transpose() * &a + DMatrix::identity(n, n) * 0.05
}

fn lac_closed_form() -> Check {
    let t0 = Instant::now();
    let mut min_margin = f64::INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=10usize);
        let stats = ClassStats {
            mu1: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            mu2: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            sigma1: random_spd(&mut rng, n),
            sigma2: random_spd(&mut rng, n),
            m1: 100,
            m2: 1000,
        };
        let fit = lac_fit(&stats, 0.0).map_err(|e| e.to_string())?;
        let best = lac_objective(&stats, &fit.w).map_err(|e| e.to_string())?;
        for _ in 0..10_000 {
            let mut d: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            d.iter_mut().for_each(|v| *v /= norm);
            let v = lac_objective(&stats, &d).map_err(|e| e.to_string())?;
            ensure(best >= v - 1e-12 * best.abs().max(1.0), || {
                format!("seed {seed}: direction beats closed form ({v} > {best})")
            })?;
            min_margin = min_margin.min(best - v);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("20 instances x 10^4 directions, smallest lead {min_margin:.2e}, {secs:.2} s"))
}

fn q_structure() -> Check {
    let mut worst_row = 0.0f64;
    for (m1, m2) in [(2, 2), (3, 7), (17, 40), (50, 500)] {
        let q = build_q(&QSpec::new(m1, m2, 1.0, 0.0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for i in 0..q.nrows() {
            worst_row = worst_row.max(q.row(i).sum().abs());
        }
        let qr = build_q(&QSpec::new(m1, m2, 1.0, 1e-6).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for i in 0..qr.nrows() {
            let off: f64 = (0..qr.ncols()).filter(|&j| j != i).map(|j| qr[(i, j)].abs()).sum();
            ensure(qr[(i, i)].abs() > off, || {
                format!("({m1}, {m2}) row {i}: diagonal {} vs off-diagonal sum {off}", qr[(i, i)])
            })?;
        }
    }
    ensure(worst_row <= 1e-12, || format!("row sum {worst_row:e}"))?;
    Ok(format!("largest |row sum| {worst_row:.1e}; ridge 1e-6 strictly diagonally dominant"))
}

fn asymmetric_advantage(dir: &Path) -> Check {
    let t0 = Instant::now();
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..5u64 {
        let cfg = experiment(&format!("seed = {seed}\ntrain.theta = 0.1\ntrain.max_weak = 100\ntrain.rounds = 100\n"));
        let rep = run_experiment(&cfg, &dir.join(format!("adv{seed}"))).map_err(|e| e.to_string())?;
        let dr = |name: &str| rep.models.iter().find(|m| m.name == name).map(|m| m.eval.detection_rate_at_fp);
        let (ada, fisher) = (dr("adaboost").ok_or("no adaboost")?, dr("fisher").ok_or("no fisher")?);
        if fisher >= ada {
            wins += 1;
        }
        rows.push(format!("{fisher:.4}/{ada:.4}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!("fisher/adaboost detection at 50% fp per seed: {}; {secs:.0} s", rows.join(", "));
    ensure(wins >= 4 && secs < 300.0, || format!("FisherBoost ahead in {wins}/5 seeds ({detail})"))?;
    Ok(format!("FisherBoost ahead in {wins}/5 seeds ({detail})"))
}

fn cascade_contract(dir: &Path) -> Check {
    let cfg = experiment(
        "seed = 7\ndata.radius = 5\ndata.n_pos = 200\ndata.test_pos = 500\ndata.test_neg = 5000\n\
         cascade.d_min = 0.97\ncascade.f_max = 0.5\ncascade.target_fp = 1e-4\ncascade.max_nodes = 5\n\
         cascade.negatives_per_node = 600\n",
    );
    let run = run_cascade(&cfg, &dir.join("cascade")).map_err(|e| e.to_string())?;
    let model = &run.outcome.model;
    ensure(model.nodes.len() == 5, || format!("{} nodes, stop {:?}", model.nodes.len(), run.outcome.stop))?;
    ensure(run.outcome.stop == CascadeStop::MaxNodes, || format!("stop {:?}", run.outcome.stop))?;
    let (train_d, _) = cfg.datasets().map_err(|e| e.to_string())?;
    for (t, n) in model.nodes.iter().enumerate() {
        ensure(n.d >= 0.97 && n.f <= 0.5, || format!("node {t}: d = {}, f = {}", n.d, n.f))?;
        let passed = train_d.positives().iter().filter(|x| model.node_margins(x)[t] >= 0.0).count();
        let d = passed as f64 / train_d.m1() as f64;
        ensure(d == n.d, || format!("node {t}: recorded d {} but recomputed {d}", n.d))?;
        if t > 0 {
            ensure(n.weak_count > model.nodes[t - 1].weak_count, || format!("node {t}: weak count does not increase"))?;
        }
    }
    let mut rng = seeded(99);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..2).map(|_| 8.0 * normal(&mut rng)).collect();
        let lazy = model.predict(&x);
        let (label, exit) = model.predict_full(&x);
        ensure(lazy.label == label && lazy.exit_index == exit, || format!("lazy and full disagree at {x:?}"))?;
    }
    let counts: Vec<String> = model.nodes.iter().map(|n| n.weak_count.to_string()).collect();
    let d: Vec<String> = model.nodes.iter().map(|n| format!("{:.3}", n.d)).collect();
    let f: Vec<String> = model.nodes.iter().map(|n| format!("{:.3}", n.f)).collect();
    Ok(format!("weak counts [{}], d [{}], f [{}]; lazy = full on 10^4 samples", counts.join(", "), d.join(", "), f.join(", ")))
}

fn normality() -> Check {
    let mut rng = seeded(2024);
    let draws: Vec<f64> = (0..1000).map(|_| normal(&mut rng)).collect();
    let r = margin_normality(&draws).map_err(|e| e.to_string())?.r;
    ensure(r >= 0.995, || format!("QQ r = {r}"))?;
    let data = generate(&SyntheticSpec::toy(200, 2000, 0)).map_err(|e| e.to_string())?;
    let trend = normality_trend(&data, &[7, 52], Default::default()).map_err(|e| e.to_string())?;
    let report: Vec<String> = trend.iter().map(|(n, r)| format!("{n} weak: r = {r:.4}")).collect();
    Ok(format!("normal draws r = {r:.5}; margin report (not asserted): {}", report.join(", ")))
}

fn serialization(dir: &Path) -> Check {
    let mut checked = 0;
    for seed in 0..5u64 {
        for name in ["adaboost", "fisher"] {
            let p = dir.join(format!("adv{seed}/model_{name}.txt"));
            if !p.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&p).map_err(|e| e.to_string())?;
            let model = model_from_str(&text).map_err(|e| e.to_string())?;
            ensure(model_to_string(&model) == text, || format!("{}: re-serialisation differs", p.display()))?;
            checked += 1;
        }
    }
    let p = dir.join("cascade/model_cascade.txt");
    let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    let cascade = model_from_str(&text).map_err(|e| e.to_string())?;
    ensure(matches!(cascade, Model::Cascade(_)), || "cascade file parsed as another kind".into())?;
    ensure(model_from_str(&model_to_string(&cascade)).map_err(|e| e.to_string())? == cascade, || {
        "cascade round trip is not field-exact".into()
    })?;
    checked += 1;

    let cfg = experiment("seed = 3\ndata.n_pos = 40\ndata.n_neg = 400\ntrain.max_weak = 30\nsweep.theta = 1/12\noutput.grid = 9\n");
    let (a, b) = (dir.join("rerun_a"), dir.join("rerun_b"));
    let ra = run_experiment(&cfg, &a).map_err(|e| e.to_string())?;
    let rb = run_experiment(&cfg, &b).map_err(|e| e.to_string())?;
    ensure(ra == rb, || "reports differ between reruns".into())?;
    let mut files = 0;
    for entry in std::fs::read_dir(&a).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let x = std::fs::read(a.join(&name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(&name)).map_err(|e| format!("{name:?} missing in rerun: {e}"))?;
        ensure(x == y, || format!("{name:?} differs between reruns"))?;
        files += 1;
    }
    Ok(format!("{checked} trained models round-trip exactly; {files} artifacts bit-identical across reruns"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        ("cascade rate products", Box::new(cascade_products)),
        ("phi family", Box::new(phi_family)),
        ("EG solver vs oracle", Box::new(eg_vs_oracle)),
        ("column generation trace and dual feasibility", Box::new(column_generation)),
        ("duality gap with ridge", Box::new(duality_gap)),
        ("LAC closed form", Box::new(lac_closed_form)),
        ("Q structure", Box::new(q_structure)),
        ("asymmetric advantage", Box::new(|| asymmetric_advantage(dir.path()))),
        ("cascade training contract", Box::new(|| cascade_contract(dir.path()))),
        ("normality diagnostic", Box::new(normality)),
        ("serialization and reproducibility", Box::new(|| serialization(dir.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
