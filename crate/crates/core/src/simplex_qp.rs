//! Quadratic programs over the unit simplex,
//! `min ½ wᵀPw + cᵀw  s.t.  w ≥ 0, Σw = 1`.
//!
//! [`eg_solve`] is the production solver: entropic (exponentiated) gradient
//! descent with step `τ_k = √(2 ln n) / (L_f √k)`. [`oracle_solve`] is an
//! independent Euclidean projected-gradient solver used to check it.

use nalgebra::{DMatrix, DVector};

use crate::data::dot;
use crate::error::{check_len, input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexQp {
    p: DMatrix<f64>,
    c: DVector<f64>,
}

impl SimplexQp {
    pub fn new(p: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = c.len();
        if n == 0 {
            return input("simplex QP needs at least one variable");
        }
        check_len(n, p.nrows(), "P rows vs c")?;
        check_len(n, p.ncols(), "P cols vs c")?;
        for i in 0..n {
            for j in 0..i {
                if (p[(i, j)] - p[(j, i)]).abs() > 1e-10 {
                    return input(format!("P is not symmetric at ({i}, {j})"));
                }
            }
        }
        if p.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return input("P and c must be finite");
        }
        Ok(Self { p, c })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.p * w + &self.c
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.p * w)) + self.c.dot(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgConfig {
    /// Stop once the max-norm change between iterates drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub lipschitz_override: Option<f64>,
}

impl Default for EgConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 200_000,
            lipschitz_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Uniform,
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `L_f = max_j (max_k |P_jk| + |c_j|)`, a bound on `‖Pw + c‖_∞` over the simplex.
pub fn lipschitz_bound(qp: &SimplexQp) -> f64 {
    (0..qp.dim())
        .map(|j| {
            let row = qp.p.row(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            row + qp.c[j].abs()
        })
        .fold(0.0, f64::max)
}

/// `max_{j,k} |P_jk + c_j|`: the exact supremum of `‖Pw + c‖_∞` over the
/// simplex (each gradient entry is linear in `w`, so it peaks at a vertex).
/// Never larger than [`lipschitz_bound`]; pass it as `lipschitz_override`.
pub fn gradient_sup_norm(qp: &SimplexQp) -> f64 {
    (0..qp.dim())
        .map(|j| {
            qp.p
                .row(j)
                .iter()
                .fold(0.0f64, |m, v| m.max((v + qp.c[j]).abs()))
        })
        .fold(0.0, f64::max)
}

pub fn eg_solve(qp: &SimplexQp, start: &Start, cfg: &EgConfig) -> Result<QpSolution> {
    if !(cfg.tolerance > 0.0) {
        return input("EG tolerance must be positive");
    }
    let n = qp.dim();
    let w = match start {
        Start::Uniform => DVector::from_element(n, 1.0 / n as f64),
        Start::Point(p) => {
            check_len(n, p.len(), "EG start point")?;
            if p.iter().any(|&v| !(v > 0.0)) {
                return input("EG start point must be strictly inside the simplex");
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return input(format!("EG start point sums to {s}, not 1"));
            }
            DVector::from_iterator(n, p.iter().map(|v| v / s))
        }
    };
    if n == 1 {
        return Ok(QpSolution {
            objective: qp.objective(&w),
            w: vec![1.0],
            iterations: 0,
            converged: true,
        });
    }

    let lf = cfg.lipschitz_override.unwrap_or_else(|| lipschitz_bound(qp));
    if lf <= 0.0 {
        // P = 0 and c = 0: every point is optimal
        return Ok(QpSolution {
            objective: qp.objective(&w),
            w: w.as_slice().to_vec(),
            iterations: 0,
            converged: true,
        });
    }
    let base_step = (2.0 * (n as f64).ln()).sqrt() / lf;

    let p = qp.p.as_slice();
    let c = qp.c.as_slice();
    let mut w: Vec<f64> = w.as_slice().to_vec();
    let mut best_w = w.clone();
    let mut best_obj = f64::INFINITY;
    let mut grad = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iterations {
        // P is symmetric, so column j of the column-major storage is row j
        for ((g, col), &cj) in grad.iter_mut().zip(p.chunks_exact(n)).zip(c) {
            *g = cj + dot(col, &w);
        }
        // f(w) = ½ wᵀ(Pw + c) + ½ cᵀw, with Pw + c already in hand
        let obj = 0.5 * (dot(&w, &grad) + dot(c, &w));
        if obj < best_obj {
            best_obj = obj;
            best_w.copy_from_slice(&w);
        }

        let tau = base_step / (k as f64).sqrt();
        let shift = grad.iter().fold(f64::INFINITY, |m, &g| m.min(g));
        let mut total = 0.0;
        for ((v, &wj), &gj) in next.iter_mut().zip(&w).zip(&grad) {
            *v = wj * (-tau * (gj - shift)).exp();
            total += *v;
        }
        let mut change = 0.0f64;
        for (v, &wj) in next.iter_mut().zip(&w) {
            *v /= total;
            // keep subnormals out of the hot loop
            if *v < 1e-250 {
                *v = 0.0;
            }
            change = change.max((*v - wj).abs());
        }
        std::mem::swap(&mut w, &mut next);
        iterations = k;
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let last = qp.objective(&DVector::from_column_slice(&w));
    if last <= best_obj {
        best_obj = last;
        best_w = w;
    }
    Ok(QpSolution {
        w: best_w,
        objective: best_obj,
        iterations,
        converged,
    })
}

/// Euclidean projection onto the unit simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

const ORACLE_MAX_ITERATIONS: usize = 1_000_000;

/// Reference solver: projected gradient with exact simplex projection and
/// step `1/λ_max(P)`, seeded by a dense grid search at resolution `1e-3` for
/// `n ≤ 3`, then polished by an exact KKT solve on the detected support.
pub fn oracle_solve(qp: &SimplexQp) -> QpSolution {
    let n = qp.dim();
    let mut start = DVector::from_element(n, 1.0 / n as f64);
    if n <= 3 {
        let grid = grid_search(qp, 1000);
        if qp.objective(&grid) < qp.objective(&start) {
            start = grid;
        }
    }
    let lambda_max = qp
        .p
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &v| m.max(v));
    if lambda_max <= 0.0 {
        // linear objective: best vertex
        let j = (0..n)
            .min_by(|&a, &b| qp.c[a].partial_cmp(&qp.c[b]).unwrap())
            .unwrap();
        let mut w = DVector::zeros(n);
        w[j] = 1.0;
        return QpSolution {
            objective: qp.objective(&w),
            w: w.as_slice().to_vec(),
            iterations: 0,
            converged: true,
        };
    }
    let step = 1.0 / lambda_max;
    let mut w = start;
    let mut iterations = 0;
    let mut converged = false;
    for k in 1..=ORACLE_MAX_ITERATIONS {
        let grad = qp.gradient(&w);
        let trial: Vec<f64> = w.iter().zip(grad.iter()).map(|(x, g)| x - step * g).collect();
        let next = DVector::from_vec(project_simplex(&trial));
        let change = (&next - &w).amax();
        w = next;
        iterations = k;
        if change < 1e-15 {
            converged = true;
            break;
        }
    }
    if let Some(polished) = kkt_polish(qp, &w) {
        if qp.objective(&polished) <= qp.objective(&w) + 1e-15 {
            w = polished;
        }
    }
    QpSolution {
        objective: qp.objective(&w),
        w: w.as_slice().to_vec(),
        iterations,
        converged,
    }
}

/// Solves the equality-constrained QP on the support of `w` exactly and
/// returns it if it satisfies the simplex KKT conditions.
fn kkt_polish(qp: &SimplexQp, w: &DVector<f64>) -> Option<DVector<f64>> {
    let n = qp.dim();
    let support: Vec<usize> = (0..n).filter(|&j| w[j] > 1e-10).collect();
    let s = support.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    let mut rhs = DVector::zeros(s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = qp.p[(i, j)];
        }
        kkt[(a, s)] = -1.0;
        kkt[(s, a)] = 1.0;
        rhs[a] = -qp.c[i];
    }
    rhs[s] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut out = DVector::zeros(n);
    for (a, &i) in support.iter().enumerate() {
        if sol[a] < 0.0 {
            return None;
        }
        out[i] = sol[a];
    }
    let multiplier = sol[s];
    let grad = qp.gradient(&out);
    let scale = 1.0 + multiplier.abs();
    if (0..n).any(|j| grad[j] < multiplier - 1e-10 * scale) {
        return None;
    }
    Some(out)
}

fn grid_search(qp: &SimplexQp, steps: usize) -> DVector<f64> {
    let n = qp.dim();
    let h = 1.0 / steps as f64;
    let mut best = DVector::from_element(n, 1.0 / n as f64);
    let mut best_obj = qp.objective(&best);
    let mut consider = |w: DVector<f64>| {
        let o = qp.objective(&w);
        if o < best_obj {
            best_obj = o;
            best = w;
        }
    };
    match n {
        1 => {}
        2 => {
            for a in 0..=steps {
                let x = a as f64 * h;
                consider(DVector::from_vec(vec![x, 1.0 - x]));
            }
        }
        _ => {
            for a in 0..=steps {
                for b in 0..=(steps - a) {
                    let (x, y) = (a as f64 * h, b as f64 * h);
                    consider(DVector::from_vec(vec![x, y, (1.0 - x - y).max(0.0)]));
                }
            }
        }
    }
    best
}

/// `(1 - mix)·[previous; 0…] + mix·uniform(new_n)`: a strictly interior
/// start for a problem that gained columns.
pub fn warm_start(previous: &[f64], new_n: usize, mix: f64) -> Result<Vec<f64>> {
    if !(mix > 0.0 && mix < 1.0) {
        return input(format!("warm-start mix {mix} must lie in (0, 1)"));
    }
    if new_n < previous.len() || new_n == 0 {
        return input(format!(
            "warm start cannot shrink from {} to {new_n} variables",
            previous.len()
        ));
    }
    let floor = mix / new_n as f64;
    let mut out: Vec<f64> = previous.iter().map(|&v| (1.0 - mix) * v + floor).collect();
    out.resize(new_n, floor);
    Ok(out)
}
