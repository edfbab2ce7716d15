//! Shared data model: labelled samples, decision stumps, the response
//! matrix `A` with `A[i][j] = y_i h_j(x_i)`, margins and the class-balance
//! vector `e`.
//!
//! Every [`Dataset`] stores its samples positives-first. Block-structured
//! quantities (`e`, the `Q` matrix) rely on that ordering.

use std::ops::Deref;

use crate::error::{check_len, input, Result};

/// Binary label. Stored as `+1` / `-1`.
pub type Label = i8;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Vec<f64>>,
    labels: Vec<Label>,
    m1: usize,
    m2: usize,
    dim: usize,
    /// `original_index[i]` is the position of stored sample `i` in the input order.
    original_index: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from samples in arbitrary label order. Samples are
    /// stably reordered positives-first.
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        check_len(samples.len(), labels.len(), "labels vs samples")?;
        if let Some(&bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return input(format!("label {bad} is not +1 or -1"));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        // stable: positives keep their relative order, as do negatives
        order.sort_by_key(|&i| if labels[i] == 1 { 0 } else { 1 });

        let mut slots: Vec<Option<Vec<f64>>> = samples.into_iter().map(Some).collect();
        let mut sorted = Vec::with_capacity(order.len());
        let mut sorted_labels = Vec::with_capacity(order.len());
        for &i in &order {
            sorted.push(slots[i].take().expect("each index visited once"));
            sorted_labels.push(labels[i]);
        }
        Self::assemble(sorted, sorted_labels, order)
    }

    /// Builds a dataset from separate positive and negative sample sets.
    pub fn from_classes(positives: Vec<Vec<f64>>, negatives: Vec<Vec<f64>>) -> Result<Self> {
        let m1 = positives.len();
        let m = m1 + negatives.len();
        let mut labels = vec![1; m1];
        labels.resize(m, -1);
        let mut samples = positives;
        samples.extend(negatives);
        Self::assemble(samples, labels, (0..m).collect())
    }

    fn assemble(samples: Vec<Vec<f64>>, labels: Vec<Label>, original_index: Vec<usize>) -> Result<Self> {
        let m1 = labels.iter().filter(|&&y| y == 1).count();
        let m2 = labels.len() - m1;
        if m1 == 0 || m2 == 0 {
            return input(format!(
                "both classes must be present (positives {m1}, negatives {m2})"
            ));
        }
        let dim = samples[0].len();
        if dim == 0 {
            return input("samples must have at least one feature");
        }
        for (i, x) in samples.iter().enumerate() {
            check_len(dim, x.len(), "sample dimension")?;
            if x.iter().any(|v| !v.is_finite()) {
                return input(format!("sample {} contains a non-finite feature", original_index[i]));
            }
        }
        Ok(Self {
            samples,
            labels,
            m1,
            m2,
            dim,
            original_index,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn positives(&self) -> &[Vec<f64>] {
        &self.samples[..self.m1]
    }

    pub fn negatives(&self) -> &[Vec<f64>] {
        &self.samples[self.m1..]
    }

    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// Decision stump: `polarity` when `x[feature_index] >= threshold`, else `-polarity`.
/// Thresholds of `±inf` give the two constant classifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakHypothesis {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: Polarity,
}

impl WeakHypothesis {
    pub fn new(feature_index: usize, threshold: f64, polarity: Polarity) -> Self {
        Self {
            feature_index,
            threshold,
            polarity,
        }
    }

    /// The stump that outputs `+1` everywhere.
    pub fn constant_positive() -> Self {
        Self::new(0, f64::NEG_INFINITY, Polarity::Positive)
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature_index] >= self.threshold {
            self.polarity.sign()
        } else {
            -self.polarity.sign()
        }
    }
}

/// Column `y_i h(x_i)` of the response matrix.
pub fn build_response_column(h: &WeakHypothesis, data: &Dataset) -> Result<Vec<f64>> {
    if h.feature_index >= data.dim() {
        return input(format!(
            "feature index {} out of range for dimension {}",
            h.feature_index,
            data.dim()
        ));
    }
    Ok(data
        .samples
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| f64::from(y) * h.predict(x))
        .collect())
}

/// The matrix `A` stored column-major, one column per selected weak hypothesis.
#[derive(Debug, Clone, Default)]
pub struct ResponseMatrix {
    rows: usize,
    columns: Vec<Vec<f64>>,
    hypotheses: Vec<WeakHypothesis>,
}

impl ResponseMatrix {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            columns: Vec::new(),
            hypotheses: Vec::new(),
        }
    }

    /// Response matrix of `hypotheses` evaluated on `data`.
    pub fn from_hypotheses(data: &Dataset, hypotheses: &[WeakHypothesis]) -> Result<Self> {
        let mut a = Self::new(data.len());
        for h in hypotheses {
            a.push(*h, data)?;
        }
        Ok(a)
    }

    pub fn push(&mut self, h: WeakHypothesis, data: &Dataset) -> Result<&[f64]> {
        check_len(self.rows, data.len(), "response matrix rows")?;
        let col = build_response_column(&h, data)?;
        self.columns.push(col);
        self.hypotheses.push(h);
        Ok(self.columns.last().expect("just pushed"))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn hypotheses(&self) -> &[WeakHypothesis] {
        &self.hypotheses
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    /// `Aᵀ u`: the weighted edge of every column.
    pub fn transpose_mul(&self, u: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, u)).collect()
    }
}

/// `ρ = A w`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector(Vec<f64>);

impl MarginVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for MarginVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn compute_margins(a: &ResponseMatrix, w: &[f64]) -> Result<MarginVector> {
    check_len(a.cols(), w.len(), "coefficients vs response columns")?;
    let mut rho = vec![0.0; a.rows()];
    for (col, &wj) in a.columns.iter().zip(w) {
        if wj == 0.0 {
            continue;
        }
        for (r, &v) in rho.iter_mut().zip(col) {
            *r += wj * v;
        }
    }
    Ok(MarginVector(rho))
}

/// `e = [1/m1, ..., 1/m1, 1/m2, ..., 1/m2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceVector {
    values: Vec<f64>,
    m1: usize,
}

impl BalanceVector {
    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.values.len() - self.m1
    }
}

impl Deref for BalanceVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

pub fn build_balance_vector(m1: usize, m2: usize) -> Result<BalanceVector> {
    if m1 == 0 || m2 == 0 {
        return input(format!("class counts must be positive (m1 {m1}, m2 {m2})"));
    }
    let mut values = vec![1.0 / m1 as f64; m1];
    values.resize(m1 + m2, 1.0 / m2 as f64);
    Ok(BalanceVector { values, m1 })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_d(xs: &[f64], ys: &[Label]) -> Dataset {
        Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn dataset_is_positives_first() {
        let d = one_d(&[0.0, 1.0, 2.0, 3.0], &[-1, 1, -1, 1]);
        assert_eq!(d.labels(), &[1, 1, -1, -1]);
        assert_eq!(d.original_index(), &[1, 3, 0, 2]);
        assert_eq!(d.sample(0), &[1.0]);
        assert_eq!((d.m1(), d.m2()), (2, 2));
    }

    #[test]
    fn dataset_rejects_bad_input() {
        assert!(Dataset::new(vec![vec![f64::NAN], vec![1.0]], vec![1, -1]).is_err());
        assert!(Dataset::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).is_err());
        assert!(Dataset::new(vec![vec![0.0], vec![1.0, 2.0]], vec![1, -1]).is_err());
        assert!(Dataset::new(vec![vec![0.0], vec![1.0]], vec![1, 0]).is_err());
    }

    #[test]
    fn constant_stump_column() {
        let d = one_d(&[0.0, 1.0, 2.0], &[1, 1, -1]);
        let h = WeakHypothesis::constant_positive();
        assert_eq!(build_response_column(&h, &d).unwrap(), vec![1.0, 1.0, -1.0]);
    }

    #[test]
    fn correct_stump_column() {
        let d = one_d(&[0.0, 2.0], &[-1, 1]);
        let h = WeakHypothesis::new(0, 1.0, Polarity::Positive);
        assert_eq!(build_response_column(&h, &d).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn stump_threshold_is_inclusive() {
        let h = WeakHypothesis::new(0, 1.0, Polarity::Positive);
        assert_eq!(h.predict(&[1.0]), 1.0);
        assert_eq!(h.predict(&[0.999]), -1.0);
        let flipped = WeakHypothesis::new(0, 1.0, Polarity::Negative);
        assert_eq!(flipped.predict(&[1.0]), -1.0);
    }

    #[test]
    fn column_rejects_out_of_range_feature() {
        let d = one_d(&[0.0, 2.0], &[-1, 1]);
        let h = WeakHypothesis::new(3, 1.0, Polarity::Positive);
        assert!(build_response_column(&h, &d).is_err());
    }

    #[test]
    fn random_column_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Label> = vec![1, -1, 1, -1, -1];
        let d = Dataset::new(samples, labels).unwrap();
        let h = WeakHypothesis::new(1, 0.1, Polarity::Negative);
        let col = build_response_column(&h, &d).unwrap();
        for i in 0..d.len() {
            let pred = if d.sample(i)[1] >= 0.1 { -1.0 } else { 1.0 };
            assert_eq!(col[i], f64::from(d.labels()[i]) * pred);
        }
    }

    #[test]
    fn balance_vector_examples() {
        let e = build_balance_vector(2, 3).unwrap();
        assert_eq!(&*e, &[0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(&*build_balance_vector(1, 1).unwrap(), &[1.0, 1.0]);
        let s: f64 = build_balance_vector(4, 6).unwrap().iter().sum();
        assert!((s - 2.0).abs() < 1e-12);
        assert!(build_balance_vector(0, 3).is_err());
    }

    #[test]
    fn margins_examples() {
        let d = one_d(&[0.0, 2.0], &[1, -1]);
        let mut a = ResponseMatrix::new(2);
        a.push(WeakHypothesis::constant_positive(), &d).unwrap();
        assert_eq!(&*compute_margins(&a, &[0.0]).unwrap(), &[0.0, 0.0]);
        assert_eq!(&*compute_margins(&a, &[1.0]).unwrap(), &[1.0, -1.0]);
        assert!(compute_margins(&a, &[1.0, 0.0]).is_err());
    }

    fn random_matrix(seed: u64, m: usize, n: usize) -> (Dataset, ResponseMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Label> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let d = Dataset::new(samples, labels).unwrap();
        let mut a = ResponseMatrix::new(m);
        for j in 0..n {
            let pol = if rng.random_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
            let h = WeakHypothesis::new(j % 2, rng.random_range(-1.0..1.0), pol);
            a.push(h, &d).unwrap();
        }
        (d, a)
    }

    #[test]
    fn margins_match_naive_double_loop() {
        let (_, a) = random_matrix(11, 6, 4);
        let w = [0.1, 0.4, 0.3, 0.2];
        let rho = compute_margins(&a, &w).unwrap();
        for i in 0..6 {
            let mut s = 0.0;
            for j in 0..4 {
                s += a.get(i, j) * w[j];
            }
            assert!((rho[i] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn balance_dot_is_difference_of_class_means() {
        let (d, a) = random_matrix(3, 9, 3);
        let rho = compute_margins(&a, &[0.2, 0.5, 0.3]).unwrap();
        let e = build_balance_vector(d.m1(), d.m2()).unwrap();
        let mean_pos: f64 = rho[..d.m1()].iter().sum::<f64>() / d.m1() as f64;
        let mean_neg: f64 = rho[d.m1()..].iter().sum::<f64>() / d.m2() as f64;
        assert!((dot(&e, &rho) - (mean_pos + mean_neg)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn response_entries_are_signs(seed in 0u64..1000, n in 1usize..6) {
            let (_, a) = random_matrix(seed, 7, n);
            for c in a.columns() {
                prop_assert!(c.iter().all(|&v| v == 1.0 || v == -1.0));
            }
        }

        #[test]
        fn margins_are_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let (_, a) = random_matrix(seed, 8, 3);
            let w1 = [0.3, -0.2, 0.9];
            let w2 = [1.5, 0.1, -0.4];
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = compute_margins(&a, &mix).unwrap();
            let r1 = compute_margins(&a, &w1).unwrap();
            let r2 = compute_margins(&a, &w2).unwrap();
            for i in 0..8 {
                prop_assert!((lhs[i] - (alpha * r1[i] + beta * r2[i])).abs() < 1e-10);
            }
        }
    }
}
