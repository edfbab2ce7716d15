//! Discrete AdaBoost on the same stump learner, used as the baseline.

use super::BoostModel;
use crate::data::{Dataset, WeakHypothesis};
use crate::error::{input, Result};
use crate::stump::{StumpConfig, StumpLearner};

/// Weighted errors are clamped here so a perfect stump gets a finite vote.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaBoostStop {
    Rounds,
    /// A stump with zero weighted error was found (and kept).
    Perfect,
    /// No stump beats weighted error 1/2.
    NoEdge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostOutcome {
    /// Coefficients normalised onto the simplex.
    pub model: BoostModel,
    pub alphas: Vec<f64>,
    pub weighted_errors: Vec<f64>,
    pub stop: AdaBoostStop,
}

#[derive(Debug, Clone)]
pub struct AdaBoost<'a> {
    data: &'a Dataset,
    learner: StumpLearner,
    weights: Vec<f64>,
    hypotheses: Vec<WeakHypothesis>,
    alphas: Vec<f64>,
    errors: Vec<f64>,
}

impl<'a> AdaBoost<'a> {
    pub fn new(data: &'a Dataset, stump: StumpConfig) -> Self {
        Self::with_ensemble(data, stump, &[], &[])
    }

    /// Continues an existing ensemble: sample weights start at
    /// `exp(-y_i F(x_i))`, normalised.
    pub fn with_ensemble(
        data: &'a Dataset,
        stump: StumpConfig,
        hypotheses: &[WeakHypothesis],
        alphas: &[f64],
    ) -> Self {
        let margins: Vec<f64> = data
            .samples()
            .iter()
            .zip(data.labels())
            .map(|(x, &y)| {
                let f: f64 = hypotheses.iter().zip(alphas).map(|(h, a)| a * h.predict(x)).sum();
                f64::from(y) * f
            })
            .collect();
        // shift by the smallest margin before exponentiating
        let lo = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut weights: Vec<f64> = margins.iter().map(|&r| (-(r - lo)).exp()).collect();
        normalise(&mut weights);
        Self {
            data,
            learner: StumpLearner::with_config(data, stump),
            weights,
            hypotheses: hypotheses.to_vec(),
            alphas: alphas.to_vec(),
            errors: Vec::new(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn hypotheses(&self) -> &[WeakHypothesis] {
        &self.hypotheses
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Adds one stump. `Some(stop)` means nothing more can be learned.
    pub fn round(&mut self) -> Result<Option<AdaBoostStop>> {
        let choice = self.learner.best(self.data, &self.weights)?;
        let err = 0.5 * (1.0 - choice.edge);
        if err >= 0.5 {
            return Ok(Some(AdaBoostStop::NoEdge));
        }
        let clamped = err.max(MIN_ERROR);
        let alpha = 0.5 * ((1.0 - clamped) / clamped).ln();
        let h = choice.hypothesis;
        for ((wi, x), &y) in self.weights.iter_mut().zip(self.data.samples()).zip(self.data.labels()) {
            *wi *= (-alpha * f64::from(y) * h.predict(x)).exp();
        }
        normalise(&mut self.weights);
        self.hypotheses.push(h);
        self.alphas.push(alpha);
        self.errors.push(err);
        Ok((err <= MIN_ERROR).then_some(AdaBoostStop::Perfect))
    }

    pub fn model(&self) -> BoostModel {
        let total: f64 = self.alphas.iter().sum();
        BoostModel {
            hypotheses: self.hypotheses.clone(),
            w: self.alphas.iter().map(|a| a / total).collect(),
            b: 0.0,
        }
    }

    fn into_outcome(self, stop: AdaBoostStop) -> AdaBoostOutcome {
        AdaBoostOutcome {
            model: self.model(),
            alphas: self.alphas,
            weighted_errors: self.errors,
            stop,
        }
    }
}

fn normalise(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
}

pub fn adaboost_train(data: &Dataset, rounds: usize, stump: StumpConfig) -> Result<AdaBoostOutcome> {
    if rounds == 0 {
        return input("AdaBoost needs at least one round");
    }
    let mut ada = AdaBoost::new(data, stump);
    for _ in 0..rounds {
        if let Some(stop) = ada.round()? {
            if ada.hypotheses.is_empty() {
                return input("no stump has any edge on this data");
            }
            return Ok(ada.into_outcome(stop));
        }
    }
    Ok(ada.into_outcome(AdaBoostStop::Rounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn error_rate(model: &BoostModel, d: &Dataset) -> f64 {
        let wrong = d
            .samples()
            .iter()
            .zip(d.labels())
            .filter(|(x, &y)| model.predict(x) != y)
            .count();
        wrong as f64 / d.len() as f64
    }

    #[test]
    fn separable_stops_after_one_round() {
        let d = Dataset::new(
            [0.0, 1.0, 2.0, 3.0].iter().map(|&x| vec![x]).collect(),
            vec![-1, -1, 1, 1],
        )
        .unwrap();
        let out = adaboost_train(&d, 10, StumpConfig::default()).unwrap();
        assert_eq!(out.stop, AdaBoostStop::Perfect);
        assert_eq!(out.alphas.len(), 1);
        assert!(out.alphas[0].is_finite());
        assert_eq!(out.model.w, vec![1.0]);
        assert_eq!(error_rate(&out.model, &d), 0.0);
    }

    #[test]
    fn xor_training_error_below_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut samples = Vec::new();
        let mut labels: Vec<Label> = Vec::new();
        for _ in 0..200 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            samples.push(vec![x, y]);
            labels.push(if x * y > 0.0 { 1 } else { -1 });
        }
        let d = Dataset::new(samples, labels).unwrap();
        let out = adaboost_train(&d, 50, StumpConfig::default()).unwrap();
        assert!(error_rate(&out.model, &d) < 0.5);
    }

    #[test]
    fn weights_stay_normalised_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let labels: Vec<Label> = samples.iter().map(|x| if x[0] + 0.3 * x[1] > 0.1 { 1 } else { -1 }).collect();
        let d = Dataset::new(samples, labels).unwrap();
        let mut ada = AdaBoost::new(&d, StumpConfig::default());
        for _ in 0..20 {
            if ada.round().unwrap().is_some() {
                break;
            }
            assert!(ada.weights().iter().all(|&w| w > 0.0));
            assert!((ada.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let model = ada.model();
        assert!((model.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rounds_rejected() {
        let d = Dataset::new(vec![vec![0.0], vec![1.0]], vec![1, -1]).unwrap();
        assert!(adaboost_train(&d, 0, StumpConfig::default()).is_err());
    }
}
