//! Seeded synthetic two-class data.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;

use super::rng::{normal, seeded, uniform};
use crate::data::Dataset;
use crate::error::{check_len, input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    /// Row-major covariance.
    pub cov: Vec<Vec<f64>>,
}

impl Gaussian {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variance } else { 0.0 }).collect())
            .collect();
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NegativeShape {
    Gaussian(Gaussian),
    /// Shell around the positive mean: radius drawn from
    /// `N(radius, radial_sd²)`, direction uniform on the sphere.
    Ring { radius: f64, radial_sd: f64 },
    /// Uniform on the box `[low, high]^d`.
    Uniform { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    TwoGaussians,
    GaussianVsRing,
    GaussianVsUniform,
}

impl SyntheticKind {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::TwoGaussians => "two_gaussians",
            SyntheticKind::GaussianVsRing => "gaussian_vs_ring",
            SyntheticKind::GaussianVsUniform => "gaussian_vs_uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub positive: Gaussian,
    pub negative: NegativeShape,
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Standard normal positives in the plane inside a ring of radius 2.
    pub fn toy(n_pos: usize, n_neg: usize, seed: u64) -> Self {
        Self {
            positive: Gaussian::isotropic(vec![0.0, 0.0], 1.0),
            negative: NegativeShape::Ring {
                radius: 2.0,
                radial_sd: 0.7,
            },
            n_pos,
            n_neg,
            seed,
        }
    }

    pub fn kind(&self) -> SyntheticKind {
        match self.negative {
            NegativeShape::Gaussian(_) => SyntheticKind::TwoGaussians,
            NegativeShape::Ring { .. } => SyntheticKind::GaussianVsRing,
            NegativeShape::Uniform { .. } => SyntheticKind::GaussianVsUniform,
        }
    }

    pub fn dim(&self) -> usize {
        self.positive.dim()
    }

    pub fn with_counts(&self, n_pos: usize, n_neg: usize, seed: u64) -> Self {
        Self {
            n_pos,
            n_neg,
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
struct GaussianSampler {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    fn new(g: &Gaussian) -> Result<Self> {
        let d = g.dim();
        if d == 0 {
            return input("dimension must be at least 1");
        }
        check_len(d, g.cov.len(), "covariance rows")?;
        for row in &g.cov {
            check_len(d, row.len(), "covariance columns")?;
        }
        let cov = DMatrix::from_fn(d, d, |i, j| g.cov[i][j]);
        if cov.iter().chain(&g.mean).any(|v| !v.is_finite()) {
            return input("mean and covariance must be finite");
        }
        let scale = cov.amax().max(1.0);
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return input("covariance is not symmetric");
        }
        let eig = SymmetricEigen::new(cov);
        if eig.eigenvalues.min() < -1e-10 * scale {
            return input(format!(
                "covariance is not positive semidefinite (eigenvalue {:.3e})",
                eig.eigenvalues.min()
            ));
        }
        let mut factor = eig.eigenvectors;
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            factor.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
        }
        Ok(Self {
            mean: g.mean.clone(),
            factor,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..d).map(|k| self.factor[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone)]
enum NegSampler {
    Gaussian(GaussianSampler),
    Ring { center: Vec<f64>, radius: f64, sd: f64 },
    Uniform { d: usize, low: f64, high: f64 },
}

/// Draws single samples of either class; used both for fixed datasets and
/// for unlimited negative pools.
#[derive(Debug, Clone)]
pub struct Sampler {
    pos: GaussianSampler,
    neg: NegSampler,
}

impl Sampler {
    pub fn new(spec: &SyntheticSpec) -> Result<Self> {
        let pos = GaussianSampler::new(&spec.positive)?;
        let d = spec.dim();
        let neg = match &spec.negative {
            NegativeShape::Gaussian(g) => {
                check_len(d, g.dim(), "negative mean")?;
                NegSampler::Gaussian(GaussianSampler::new(g)?)
            }
            &NegativeShape::Ring { radius, radial_sd } => {
                if !(radius.is_finite() && radial_sd >= 0.0 && radial_sd.is_finite()) {
                    return input("ring needs a finite radius and nonnegative spread");
                }
                NegSampler::Ring {
                    center: spec.positive.mean.clone(),
                    radius,
                    sd: radial_sd,
                }
            }
            &NegativeShape::Uniform { low, high } => {
                if !(low < high && low.is_finite() && high.is_finite()) {
                    return input(format!("uniform box needs low < high, got [{low}, {high}]"));
                }
                NegSampler::Uniform { d, low, high }
            }
        };
        Ok(Self { pos, neg })
    }

    pub fn positive(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.pos.draw(rng)
    }

    pub fn negative(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.neg {
            NegSampler::Gaussian(g) => g.draw(rng),
            NegSampler::Ring { center, radius, sd } => {
                let r = radius + sd * normal(rng);
                let mut dir: Vec<f64> = center.iter().map(|_| normal(rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    dir.iter_mut().for_each(|v| *v /= norm);
                } else {
                    dir[0] = 1.0;
                }
                center.iter().zip(&dir).map(|(c, u)| c + r * u).collect()
            }
            NegSampler::Uniform { d, low, high } => (0..*d).map(|_| low + (high - low) * uniform(rng)).collect(),
        }
    }
}

/// Positives are drawn first, then negatives, from one stream.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_pos == 0 || spec.n_neg == 0 {
        return input("both class counts must be at least 1");
    }
    let sampler = Sampler::new(spec)?;
    let mut rng = seeded(spec.seed);
    let pos: Vec<Vec<f64>> = (0..spec.n_pos).map(|_| sampler.positive(&mut rng)).collect();
    let neg: Vec<Vec<f64>> = (0..spec.n_neg).map(|_| sampler.negative(&mut rng)).collect();
    Dataset::from_classes(pos, neg)
}
