//! ROC curves and the summary numbers reported for them.

use crate::data::Label;
use crate::error::{check_len, input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Detection rate interpolated at 50% false positives.
    pub detection_rate_at_fp: f64,
    /// `(false-positive rate, detection rate)`, from `(0, 0)` to `(1, 1)`.
    pub roc_points: Vec<(f64, f64)>,
    /// Mean detection rate at nine log-spaced false-positive rates in
    /// `[0.01, 1]`.
    pub log_average_rate: f64,
    /// Weak classifiers evaluated per sample; zero unless the caller
    /// fills it in.
    pub mean_features_per_window: f64,
}

/// Sweeps a threshold over every distinct score; a sample is accepted when
/// its score is at or above the threshold.
pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64)>> {
    check_len(scores.len(), labels.len(), "scores vs labels")?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return input("ROC needs both classes");
    }
    if scores.iter().any(|s| s.is_nan()) {
        return input("scores contain NaN");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

/// Detection rate at false-positive rate `fp`, linear between ROC points.
pub fn detection_at(points: &[(f64, f64)], fp: f64) -> f64 {
    let k = points.partition_point(|p| p.0 <= fp);
    if k == 0 {
        return 0.0;
    }
    let (x0, y0) = points[k - 1];
    if x0 == fp || k == points.len() {
        return y0;
    }
    let (x1, y1) = points[k];
    y0 + (y1 - y0) * (fp - x0) / (x1 - x0)
}

pub fn log_average(points: &[(f64, f64)]) -> f64 {
    (0..9)
        .map(|i| detection_at(points, 10f64.powf(-2.0 + 2.0 * i as f64 / 8.0)))
        .sum::<f64>()
        / 9.0
}

pub fn roc(scores: &[f64], labels: &[Label]) -> Result<EvalReport> {
    let roc_points = roc_curve(scores, labels)?;
    Ok(EvalReport {
        detection_rate_at_fp: detection_at(&roc_points, 0.5),
        log_average_rate: log_average(&roc_points),
        roc_points,
        mean_features_per_window: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::rng::{seeded, uniform};
    use proptest::prelude::*;

    #[test]
    fn perfect_separation() {
        let r = roc(&[3.0, 2.0, -1.0, -2.0], &[1, 1, -1, -1]).unwrap();
        assert_eq!(r.detection_rate_at_fp, 1.0);
        assert_eq!(r.log_average_rate, 1.0);
        assert_eq!(r.roc_points.first(), Some(&(0.0, 0.0)));
        assert_eq!(r.roc_points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn flipped_scores_below_chance() {
        let r = roc(&[-3.0, -2.0, 1.0, 2.0], &[1, 1, -1, -1]).unwrap();
        for &(fp, dr) in &r.roc_points {
            assert!(dr <= fp);
        }
        assert_eq!(r.detection_rate_at_fp, 0.0);
    }

    #[test]
    fn random_scores_are_chance() {
        let mut rng = seeded(8);
        let scores: Vec<f64> = (0..10_000).map(|_| uniform(&mut rng)).collect();
        let labels: Vec<Label> = (0..10_000).map(|_| if uniform(&mut rng) < 0.5 { 1 } else { -1 }).collect();
        let r = roc(&scores, &labels).unwrap();
        assert!((r.detection_rate_at_fp - 0.5).abs() <= 0.02, "{}", r.detection_rate_at_fp);
    }

    #[test]
    fn ties_form_one_step() {
        let pts = roc_curve(&[1.0, 1.0, 0.0, 1.0], &[1, -1, -1, 1]).unwrap();
        assert_eq!(pts, vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(detection_at(&pts, 0.25), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc(&[1.0, 2.0], &[1, 1]).is_err());
    }

    proptest! {
        #[test]
        fn monotone(scores in prop::collection::vec(-5.0f64..5.0, 4..80), flip in prop::collection::vec(any::<bool>(), 80)) {
            let mut labels: Vec<Label> = scores.iter().zip(&flip).map(|(_, &f)| if f { 1 } else { -1 }).collect();
            labels[0] = 1;
            labels[1] = -1;
            let r = roc(&scores, &labels).unwrap();
            for w in r.roc_points.windows(2) {
                prop_assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            }
            for &(fp, dr) in &r.roc_points {
                prop_assert!((0.0..=1.0).contains(&fp) && (0.0..=1.0).contains(&dr));
            }
            let mut prev = 0.0;
            for k in 0..=20 {
                let d = detection_at(&r.roc_points, k as f64 / 20.0);
                prop_assert!(d >= prev - 1e-15);
                prev = d;
            }
        }
    }
}
