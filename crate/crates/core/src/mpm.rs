//! Worst-case accuracy of a linear classifier when only the mean and
//! covariance of a class are known.

use libm::erfc;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistributionFamily {
    Arbitrary,
    Symmetric,
    SymmetricUnimodal,
    Gaussian,
}

impl DistributionFamily {
    pub const ALL: [DistributionFamily; 4] = [
        DistributionFamily::Arbitrary,
        DistributionFamily::Symmetric,
        DistributionFamily::SymmetricUnimodal,
        DistributionFamily::Gaussian,
    ];

    /// Smallest `t` whose inverse lies strictly above one half; below it
    /// the symmetric families are pinned at `γ = 0.5`.
    fn half_point(self) -> f64 {
        match self {
            DistributionFamily::Arbitrary => 1.0,
            DistributionFamily::Symmetric => 1.0,
            DistributionFamily::SymmetricUnimodal => 2.0 / 3.0,
            DistributionFamily::Gaussian => 0.0,
        }
    }
}

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`]: Acklam's rational approximation polished by a
/// Newton step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return input(format!("quantile needs p in (0, 1), got {p}"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let mut x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };
    x -= (normal_cdf(x) - p) / normal_pdf(x);
    Ok(x)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        input(format!("gamma must lie in (0, 1), got {gamma}"))
    }
}

/// The family's φ(γ).
pub fn phi(gamma: f64, family: DistributionFamily) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(match family {
        DistributionFamily::Arbitrary => (gamma / (1.0 - gamma)).sqrt(),
        DistributionFamily::Symmetric => (1.0 / (2.0 * (1.0 - gamma))).sqrt(),
        DistributionFamily::SymmetricUnimodal => 2.0 / 3.0 * (1.0 / (2.0 * (1.0 - gamma))).sqrt(),
        DistributionFamily::Gaussian => normal_quantile(gamma)?,
    })
}

/// Worst-case accuracy reached at normalised margin `t`.
///
/// For the symmetric families any `t` at or below the value of φ(0.5) only
/// guarantees the median, so the result is 0.5 there.
pub fn phi_inverse(t: f64, family: DistributionFamily) -> Result<f64> {
    if t.is_nan() {
        return input("phi_inverse of NaN");
    }
    Ok(match family {
        DistributionFamily::Arbitrary => {
            if t < 0.0 {
                return input(format!("arbitrary family needs t >= 0, got {t}"));
            }
            if t.is_infinite() {
                1.0
            } else {
                t * t / (1.0 + t * t)
            }
        }
        DistributionFamily::Symmetric | DistributionFamily::SymmetricUnimodal => {
            if t <= family.half_point() {
                0.5
            } else {
                let k = if family == DistributionFamily::Symmetric { 0.5 } else { 2.0 / 9.0 };
                1.0 - k / (t * t)
            }
        }
        DistributionFamily::Gaussian => normal_cdf(t),
    })
}

fn quad(w: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    check_len(w.len(), sigma.nrows(), "covariance rows")?;
    check_len(w.len(), sigma.ncols(), "covariance columns")?;
    let w = DVector::from_column_slice(w);
    Ok((sigma * &w).dot(&w))
}

/// γ★ for the classifier `sign(wᵀx − b)` on a class with mean `mu1` and
/// covariance `sigma1`.
pub fn worst_case_gamma(
    w: &[f64],
    b: f64,
    mu1: &[f64],
    sigma1: &DMatrix<f64>,
    family: DistributionFamily,
) -> Result<f64> {
    check_len(w.len(), mu1.len(), "mean")?;
    let var = quad(w, sigma1)?;
    if !(var > 0.0) {
        return input("direction has zero variance");
    }
    let t = (crate::data::dot(w, mu1) - b) / var.sqrt();
    if family == DistributionFamily::Arbitrary && t < 0.0 {
        // no guarantee at all beyond the trivial one
        return Ok(0.0);
    }
    phi_inverse(t, family)
}

/// `b − wᵀμ − κ√(wᵀΣw)`; nonnegative when the worst-case constraint at
/// accuracy `gamma` holds.
pub fn worst_case_constraint_slack(
    b: f64,
    w: &[f64],
    mu: &[f64],
    sigma: &DMatrix<f64>,
    gamma: f64,
    family: DistributionFamily,
) -> Result<f64> {
    check_gamma(gamma)?;
    check_len(w.len(), mu.len(), "mean")?;
    let kappa = match family {
        DistributionFamily::Symmetric | DistributionFamily::SymmetricUnimodal if gamma <= 0.5 => 0.0,
        _ => phi(gamma, family)?,
    };
    let sd = quad(w, sigma)?.max(0.0).sqrt();
    Ok(b - crate::data::dot(w, mu) - kappa * sd)
}
