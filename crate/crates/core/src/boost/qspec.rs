use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Block structure of `Q`: `blockdiag(Q₁, δ·Q₂) + δ̃·I`, where `Q₁`/`Q₂` have
/// `1/m` on the diagonal and `-1/(m(m_c - 1))` off it. `ρᵀQ₁ρ` is
/// `m₁/m` times the unbiased variance of the positive margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSpec {
    pub m1: usize,
    pub m2: usize,
    /// Weight on the negative block: 0 gives LAC, 1 gives Fisher.
    pub delta: f64,
    pub ridge: f64,
}

impl QSpec {
    pub fn new(m1: usize, m2: usize, delta: f64, ridge: f64) -> Result<Self> {
        let spec = Self { m1, m2, delta, ridge };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.ridge >= 0.0) {
            return Err(Error::Input(format!(
                "delta ({}) and ridge ({}) must be nonnegative",
                self.delta, self.ridge
            )));
        }
        if self.m1 < 2 {
            return Err(Error::DegenerateClass(format!(
                "Q needs at least two positives, got {}",
                self.m1
            )));
        }
        if self.delta > 0.0 && self.m2 < 2 {
            return Err(Error::DegenerateClass(format!(
                "Q with delta > 0 needs at least two negatives, got {}",
                self.m2
            )));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    /// `Q v` in O(m) using the block structure.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m(), v.len(), "Q·v")?;
        let m = self.m() as f64;
        let (pos, neg) = v.split_at(self.m1);
        let mut out = Vec::with_capacity(v.len());

        let s1: f64 = pos.iter().sum();
        let k1 = m * (self.m1 as f64 - 1.0);
        out.extend(pos.iter().map(|&x| (self.m1 as f64 * x - s1) / k1 + self.ridge * x));

        if self.delta > 0.0 {
            let s2: f64 = neg.iter().sum();
            let k2 = m * (self.m2 as f64 - 1.0);
            out.extend(
                neg.iter()
                    .map(|&x| self.delta * (self.m2 as f64 * x - s2) / k2 + self.ridge * x),
            );
        } else {
            out.extend(neg.iter().map(|&x| self.ridge * x));
        }
        Ok(out)
    }

    /// `vᵀ Q v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        let qv = self.apply(v)?;
        Ok(crate::data::dot(v, &qv))
    }
}

/// Dense `Q`. O(m²) memory; the trainer itself only uses [`QSpec::apply`].
pub fn build_q(spec: &QSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let (m1, m2) = (spec.m1, spec.m2);
    let m = (m1 + m2) as f64;
    let mut q = DMatrix::zeros(m1 + m2, m1 + m2);
    let off1 = -1.0 / (m * (m1 as f64 - 1.0));
    for i in 0..m1 {
        for j in 0..m1 {
            q[(i, j)] = if i == j { 1.0 / m } else { off1 };
        }
    }
    if spec.delta > 0.0 {
        let off2 = -spec.delta / (m * (m2 as f64 - 1.0));
        for i in m1..m1 + m2 {
            for j in m1..m1 + m2 {
                q[(i, j)] = if i == j { spec.delta / m } else { off2 };
            }
        }
    }
    for i in 0..m1 + m2 {
        q[(i, i)] += spec.ridge;
    }
    Ok(q)
}
