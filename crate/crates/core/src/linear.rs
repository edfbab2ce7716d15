//! Closed-form linear asymmetric classifiers over weak-classifier outputs.

use nalgebra::{DMatrix, DVector};

use crate::boost::fit_offset;
use crate::data::WeakHypothesis;
use crate::error::{check_len, input, Error, Result};

const DEFAULT_JITTER: f64 = 1e-6;

/// Per-class means and unbiased covariances of response vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
    pub m1: usize,
    pub m2: usize,
}

impl ClassStats {
    pub fn dim(&self) -> usize {
        self.mu1.len()
    }

    pub fn mean_difference(&self) -> DVector<f64> {
        &self.mu1 - &self.mu2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub w: Vec<f64>,
    pub b: f64,
    /// True when the system was singular and a diagonal jitter had to be added.
    pub jittered: bool,
}

impl LinearFit {
    pub fn score(&self, responses: &[f64]) -> f64 {
        crate::data::dot(&self.w, responses) - self.b
    }
}

/// Evaluates every hypothesis on every sample: one row per sample.
pub fn response_rows(hypotheses: &[WeakHypothesis], samples: &[Vec<f64>]) -> Vec<Vec<f64>> {
    samples
        .iter()
        .map(|x| hypotheses.iter().map(|h| h.predict(x)).collect())
        .collect()
}

fn mean_cov(rows: &[Vec<f64>], n: usize, which: &str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if rows.len() < 2 {
        return Err(Error::DegenerateClass(format!(
            "{which} class has {} rows, need at least 2",
            rows.len()
        )));
    }
    let mut mu = DVector::zeros(n);
    for r in rows {
        check_len(n, r.len(), "response row")?;
        for (m, &v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    mu /= rows.len() as f64;
    let mut cov = DMatrix::zeros(n, n);
    let mut centred = vec![0.0; n];
    for r in rows {
        for k in 0..n {
            centred[k] = r[k] - mu[k];
        }
        for j in 0..n {
            let cj = centred[j];
            if cj == 0.0 {
                continue;
            }
            for i in j..n {
                cov[(i, j)] += centred[i] * cj;
            }
        }
    }
    let denom = (rows.len() - 1) as f64;
    for j in 0..n {
        for i in j..n {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mu, cov))
}

pub fn class_stats(responses_pos: &[Vec<f64>], responses_neg: &[Vec<f64>]) -> Result<ClassStats> {
    let n = responses_pos
        .first()
        .or(responses_neg.first())
        .map(Vec::len)
        .unwrap_or(0);
    let (mu1, sigma1) = mean_cov(responses_pos, n, "positive")?;
    let (mu2, sigma2) = mean_cov(responses_neg, n, "negative")?;
    Ok(ClassStats {
        mu1,
        mu2,
        sigma1,
        sigma2,
        m1: responses_pos.len(),
        m2: responses_neg.len(),
    })
}

/// Solves `(c + jitter I) x = rhs`. A singular system at the requested jitter
/// is retried once with `1e-6 * trace / n`.
fn spd_solve(c: &DMatrix<f64>, rhs: &DVector<f64>, jitter: f64) -> Result<(DVector<f64>, bool)> {
    if jitter < 0.0 || !jitter.is_finite() {
        return input(format!("jitter must be finite and nonnegative, got {jitter}"));
    }
    if let Some(x) = try_cholesky(c, rhs, jitter) {
        return Ok((x, false));
    }
    let n = c.nrows().max(1) as f64;
    let tr = c.trace();
    let fallback = jitter + if tr > 0.0 { DEFAULT_JITTER * tr / n } else { DEFAULT_JITTER };
    log::debug!("singular covariance, retrying with jitter {fallback:e}");
    try_cholesky(c, rhs, fallback)
        .map(|x| (x, true))
        .ok_or_else(|| Error::Numerical("covariance not positive definite even after jitter".into()))
}

fn try_cholesky(c: &DMatrix<f64>, rhs: &DVector<f64>, jitter: f64) -> Option<DVector<f64>> {
    let mut m = c.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    let chol = m.cholesky()?;
    // Cholesky happily succeeds on numerically singular matrices; reject tiny pivots.
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..l.nrows() {
        let d = l[(i, i)] * l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > hi * 1e-13) {
        return None;
    }
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `w = Σ₁⁻¹(μ₁ − μ₂)`, `b = wᵀμ₂`.
pub fn lac_fit(stats: &ClassStats, jitter: f64) -> Result<LinearFit> {
    let (w, jittered) = spd_solve(&stats.sigma1, &stats.mean_difference(), jitter)?;
    let b = w.dot(&stats.mu2);
    Ok(LinearFit {
        w: w.iter().copied().collect(),
        b,
        jittered,
    })
}

/// Direction solving `((m1/m)Σ₁ + δ(m2/m)Σ₂) w = μ₁ − μ₂`.
pub fn lda_direction(
    stats: &ClassStats,
    delta: f64,
    class_weights: (f64, f64),
    jitter: f64,
) -> Result<(Vec<f64>, bool)> {
    if delta < 0.0 || !delta.is_finite() {
        return input(format!("delta must be finite and nonnegative, got {delta}"));
    }
    let (a1, a2) = class_weights;
    if !(a1 > 0.0 && a2 >= 0.0 && a1.is_finite() && a2.is_finite()) {
        return input(format!("invalid class weights ({a1}, {a2})"));
    }
    let cw = &stats.sigma1 * a1 + &stats.sigma2 * (delta * a2);
    let (w, jittered) = spd_solve(&cw, &stats.mean_difference(), jitter)?;
    Ok((w.iter().copied().collect(), jittered))
}

/// LDA-style fit; the offset is tuned on the training responses so that at
/// most `target_fp` of the negatives score at or above it.
pub fn lda_fit(
    stats: &ClassStats,
    delta: f64,
    class_weights: (f64, f64),
    jitter: f64,
    responses_pos: &[Vec<f64>],
    responses_neg: &[Vec<f64>],
    target_fp: f64,
) -> Result<LinearFit> {
    let (w, jittered) = lda_direction(stats, delta, class_weights, jitter)?;
    let mut scores = Vec::with_capacity(responses_pos.len() + responses_neg.len());
    let mut labels = Vec::with_capacity(scores.capacity());
    for (rows, y) in [(responses_pos, 1), (responses_neg, -1)] {
        for r in rows {
            check_len(w.len(), r.len(), "response row")?;
            scores.push(crate::data::dot(&w, r));
            labels.push(y);
        }
    }
    let fit = fit_offset(&scores, &labels, target_fp)?;
    Ok(LinearFit { w, b: fit.b, jittered })
}

/// `wᵀ(μ₁−μ₂) / √(wᵀΣ₁w)`.
pub fn lac_objective(stats: &ClassStats, w: &[f64]) -> Result<f64> {
    check_len(stats.dim(), w.len(), "direction")?;
    let w = DVector::from_column_slice(w);
    let var = (&stats.sigma1 * &w).dot(&w);
    if !(var > 0.0) {
        return input("direction has zero variance under the positive covariance");
    }
    Ok(w.dot(&stats.mean_difference()) / var.sqrt())
}

/// `(wᵀ(μ₁−μ₂))² / wᵀ(Σ₁+Σ₂)w`.
pub fn fisher_ratio(stats: &ClassStats, w: &[f64]) -> Result<f64> {
    check_len(stats.dim(), w.len(), "direction")?;
    let w = DVector::from_column_slice(w);
    let var = ((&stats.sigma1 + &stats.sigma2) * &w).dot(&w);
    if !(var > 0.0) {
        return input("direction has zero within-class variance");
    }
    Ok(w.dot(&stats.mean_difference()).powi(2) / var)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceDiagnostic {
    pub diag_mean: f64,
    pub offdiag_mean: f64,
    /// `f64::INFINITY` when every off-diagonal entry is zero.
    pub ratio: f64,
}

/// Mean magnitude of diagonal against off-diagonal entries.
pub fn covariance_diagnostic(sigma: &DMatrix<f64>) -> Result<CovarianceDiagnostic> {
    let n = sigma.nrows();
    check_len(n, sigma.ncols(), "square covariance")?;
    if n < 2 {
        return input("covariance diagnostic needs n >= 2");
    }
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i == j {
                diag += sigma[(i, j)].abs();
            } else {
                off += sigma[(i, j)].abs();
            }
        }
    }
    let diag_mean = diag / n as f64;
    let offdiag_mean = off / (n * (n - 1)) as f64;
    let ratio = if offdiag_mean == 0.0 {
        f64::INFINITY
    } else {
        diag_mean / offdiag_mean
    };
    Ok(CovarianceDiagnostic {
        diag_mean,
        offdiag_mean,
        ratio,
    })
}
