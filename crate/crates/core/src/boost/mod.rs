//! Boosting: totally-corrective FisherBoost / LACBoost by column generation,
//! plus a discrete AdaBoost baseline sharing the same stump learner.

mod adaboost;
mod column_gen;
mod offset;
mod qspec;

pub use adaboost::{adaboost_train, AdaBoost, AdaBoostOutcome, AdaBoostStop};
pub use column_gen::{
    primal_objective, recover_duals, train, BoostConfig, ColumnGeneration, DualState, StopReason,
    TrainOutcome, TrainTrace, Variant,
};
pub use offset::{fit_offset, OffsetFit};
pub use qspec::{build_q, QSpec};

use crate::data::WeakHypothesis;

/// `F(x) = Σ_j w_j h_j(x) - b`; a sample is accepted when `F(x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub hypotheses: Vec<WeakHypothesis>,
    pub w: Vec<f64>,
    pub b: f64,
}

impl BoostModel {
    /// `Σ_j w_j h_j(x)`, without the offset.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.hypotheses
            .iter()
            .zip(&self.w)
            .map(|(h, &w)| w * h.predict(x))
            .sum()
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) >= self.b {
            1
        } else {
            -1
        }
    }

    pub fn scores(&self, samples: &[Vec<f64>]) -> Vec<f64> {
        samples.iter().map(|x| self.score(x)).collect()
    }
}
