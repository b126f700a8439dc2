//! Threshold calibration, accept/reject x correct/wrong confusion counts,
//! detection accuracy/error rates, and the binary rejection metrics.
//!
//! Confusion semantics for a known-class sample: accepted and correctly
//! classified is a TP, accepted but misclassified an FP, rejected although it
//! would have been classified correctly an FN, rejected and would have been
//! misclassified a TN. An unknown-class sample is an FP when accepted and a
//! TN when rejected.
//!
//! For AUROC, AUPR and FPR@TPR, known data is the positive class.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::datamodel::LogitRecord;
use crate::error::{Error, Result};
use crate::scores::{predicted_class, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedThreshold {
    pub value: f64,
    pub accept_rate_target: f64,
    pub achieved_accept_rate: f64,
    /// Number of correctly classified clean samples the threshold was fitted on.
    pub n_calibration: usize,
}

impl CalibratedThreshold {
    /// Acceptance is inclusive: a confidence equal to the threshold is accepted.
    #[inline]
    pub fn accepts(&self, confidence: f64) -> bool {
        confidence >= self.value
    }
}

/// Fits the rejection threshold so that at least a fraction `accept_rate` of
/// the given confidences satisfy `confidence >= threshold`.
///
/// With `n` confidences, at most `k = floor((1 - q) n)` may be rejected, and
/// the threshold is the `(k+1)`-th smallest confidence. Ties at the threshold
/// are accepted, so they can only raise the achieved rate.
pub fn calibrate_threshold(confidences: &[f64], accept_rate: f64) -> Result<CalibratedThreshold> {
    if !(accept_rate > 0.0 && accept_rate < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "accept_rate must lie strictly between 0 and 1, got {accept_rate}"
        )));
    }
    if confidences.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    if let Some(bad) = confidences.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite calibration confidence {bad}"
        )));
    }
    let n = confidences.len();
    let mut k = ((1.0 - accept_rate) * n as f64).floor() as usize;
    // (1 - q) n can round across an integer either way; settle on the
    // largest k whose accepted share still reaches q
    while k > 0 && ((n - k) as f64 / n as f64) < accept_rate {
        k -= 1;
    }
    while k + 1 < n && ((n - k - 1) as f64 / n as f64) >= accept_rate {
        k += 1;
    }
    let mut sorted = confidences.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let value = sorted[k];
    let accepted = n - sorted.partition_point(|c| *c < value);
    Ok(CalibratedThreshold {
        value,
        accept_rate_target: accept_rate,
        achieved_accept_rate: accepted as f64 / n as f64,
        n_calibration: n,
    })
}

/// Result of running one sample through the rejection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub accepted: bool,
    /// Whether the predicted class matches the label; `None` for unknown data.
    pub correct: Option<bool>,
}

pub fn classify_outcome(
    record: &LogitRecord,
    is_unknown: bool,
    threshold: &CalibratedThreshold,
    scorer: &Scorer,
) -> Outcome {
    let accepted = threshold.accepts(scorer.confidence(&record.logits));
    let correct = if is_unknown {
        None
    } else {
        Some(record.label == Some(predicted_class(&record.logits)))
    };
    Outcome { accepted, correct }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accepted(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn record(&mut self, outcome: Outcome) {
        match (outcome.accepted, outcome.correct) {
            (true, Some(true)) => self.tp += 1,
            (true, _) => self.fp += 1,
            (false, Some(true)) => self.fn_ += 1,
            (false, _) => self.tn += 1,
        }
    }

    /// Percentages `(dar, der)` with `der == 100 - dar`. `dar` is rounded
    /// once; the floating-point sum `dar + der` is exactly 100 (exact
    /// subtraction for dar >= 50, and a rounding error of at most half an
    /// ulp of 100 below that).
    fn rates(&self) -> Result<(f64, f64)> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyInput("detection rate of an empty confusion count"));
        }
        let good = 100.0 * (self.tp + self.tn) as f64 / total as f64;
        Ok((good, 100.0 - good))
    }
}

impl Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Tallies outcomes that all come from known data or all from unknown data.
pub fn confusion_counts(outcomes: &[Outcome], is_unknown: bool) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for o in outcomes {
        if o.correct.is_none() != is_unknown {
            return Err(Error::MixedOutcomes);
        }
        counts.record(*o);
    }
    Ok(counts)
}

/// Detection Accuracy Rate in percent: `100 (TP + TN) / total`.
pub fn dar(counts: &ConfusionCounts) -> Result<f64> {
    counts.rates().map(|(d, _)| d)
}

/// Detection Error Rate in percent, `100 - dar`.
pub fn der(counts: &ConfusionCounts) -> Result<f64> {
    counts.rates().map(|(_, e)| e)
}

/// Top-1 accuracy in percent with nothing rejected.
pub fn plain_accuracy(records: &[LogitRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("plain accuracy of an empty dataset"));
    }
    let mut correct = 0u64;
    for r in records {
        let label = r.label.ok_or_else(|| {
            Error::InvalidArgument(format!(
                "plain accuracy needs known labels; sample `{}` is unknown",
                r.sample_id
            ))
        })?;
        if predicted_class(&r.logits) == label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / records.len() as f64)
}

fn check_sides(known: &[f64], unknown: &[f64]) -> Result<()> {
    if known.is_empty() || unknown.is_empty() {
        return Err(Error::EmptyInput("binary metric needs known and unknown scores"));
    }
    if known.iter().chain(unknown).any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score in binary metric".into()));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Area under the ROC curve in Mann-Whitney form:
/// `(#{k > u} + 0.5 #{k = u}) / (|known| |unknown|)`.
pub fn auroc(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check_sides(known, unknown)?;
    let known = sorted(known);
    let unknown = sorted(unknown);
    // twice the Mann-Whitney statistic, accumulated as an integer
    let mut doubled: u128 = 0;
    let (mut below, mut upto) = (0usize, 0usize);
    for k in &known {
        while below < unknown.len() && unknown[below] < *k {
            below += 1;
        }
        upto = upto.max(below);
        while upto < unknown.len() && unknown[upto] == *k {
            upto += 1;
        }
        doubled += 2 * below as u128 + (upto - below) as u128;
    }
    let pairs = known.len() as u128 * unknown.len() as u128;
    Ok(doubled as f64 / (2 * pairs) as f64)
}

/// Settles each distinct score, from highest to lowest, as one block. Calls
/// `step(tp, fp)` with cumulative counts of scores `>=` the block value.
fn sweep_descending(known: &[f64], unknown: &[f64], mut step: impl FnMut(f64, usize, usize)) {
    let known = sorted(known);
    let unknown = sorted(unknown);
    let (mut ki, mut ui) = (known.len(), unknown.len());
    while ki > 0 || ui > 0 {
        let next = match (ki > 0, ui > 0) {
            (true, true) => known[ki - 1].max(unknown[ui - 1]),
            (true, false) => known[ki - 1],
            _ => unknown[ui - 1],
        };
        while ki > 0 && known[ki - 1] == next {
            ki -= 1;
        }
        while ui > 0 && unknown[ui - 1] == next {
            ui -= 1;
        }
        step(next, known.len() - ki, unknown.len() - ui);
    }
}

/// Average precision with known as the positive class. Thresholds are the
/// distinct scores in descending order; tied scores enter as one block.
pub fn aupr(known: &[f64], unknown: &[f64]) -> Result<f64> {
    check_sides(known, unknown)?;
    let positives = known.len() as f64;
    let mut ap = 0.0;
    let mut prev_tp = 0usize;
    sweep_descending(known, unknown, |_, tp, fp| {
        if tp > prev_tp {
            let recall_gain = (tp - prev_tp) as f64 / positives;
            let precision = tp as f64 / (tp + fp) as f64;
            ap += recall_gain * precision;
            prev_tp = tp;
        }
    });
    Ok(ap)
}

/// False-positive rate at the largest observed threshold whose TPR is at
/// least `tpr` (e.g. 0.95 for FPR@95%TPR).
pub fn fpr_at_tpr(known: &[f64], unknown: &[f64], tpr: f64) -> Result<f64> {
    check_sides(known, unknown)?;
    if !(tpr > 0.0 && tpr <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "TPR target must lie in (0, 1], got {tpr}"
        )));
    }
    let positives = known.len() as f64;
    let negatives = unknown.len() as f64;
    let mut result = None;
    sweep_descending(known, unknown, |_, tp, fp| {
        if result.is_none() && tp as f64 / positives >= tpr {
            result = Some(fp as f64 / negatives);
        }
    });
    Ok(result.expect("threshold at the minimum score has TPR 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::ScoreMethod;

    #[test]
    fn calibration_examples() {
        let confs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let t = calibrate_threshold(&confs, 0.95).unwrap();
        assert_eq!(t.value, confs[1]);
        assert!((t.value - 0.10).abs() < 1e-15);
        assert_eq!(t.achieved_accept_rate, 19.0 / 20.0);
        assert_eq!(t.n_calibration, 20);

        let t = calibrate_threshold(&[0.7; 13], 0.95).unwrap();
        assert_eq!(t.value, 0.7);
        assert_eq!(t.achieved_accept_rate, 1.0);

        // (1 - 0.9) * 10 evaluates just below 1; one rejection is still allowed
        let confs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let t = calibrate_threshold(&confs, 0.9).unwrap();
        assert_eq!(t.value, 1.0);
        assert_eq!(t.achieved_accept_rate, 0.9);

        let t = calibrate_threshold(&confs, 0.95).unwrap();
        assert_eq!(t.value, 0.0);
        assert_eq!(t.achieved_accept_rate, 1.0);
    }

    #[test]
    fn calibration_errors() {
        let err = calibrate_threshold(&[], 0.95).unwrap_err();
        assert_eq!(
            err.to_string(),
            "no correctly classified clean samples; cannot calibrate"
        );
        assert!(calibrate_threshold(&[0.1], 1.0).is_err());
        assert!(calibrate_threshold(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn calibration_is_order_independent() {
        let a = [0.3, 0.9, 0.1, 0.5, 0.5, 0.7, 0.2, 0.8, 0.4, 0.6, 0.05];
        let mut b = a;
        b.reverse();
        assert_eq!(
            calibrate_threshold(&a, 0.9).unwrap(),
            calibrate_threshold(&b, 0.9).unwrap()
        );
    }

    fn threshold(v: f64) -> CalibratedThreshold {
        CalibratedThreshold {
            value: v,
            accept_rate_target: 0.95,
            achieved_accept_rate: 1.0,
            n_calibration: 1,
        }
    }

    #[test]
    fn outcome_examples() {
        let scorer = Scorer::new(ScoreMethod::Mls, 2, 0.1, 2).unwrap();
        let r = LogitRecord::new("a", Some(1), vec![0.0, 0.99]);
        let o = classify_outcome(&r, false, &threshold(0.5), &scorer);
        assert_eq!(
            o,
            Outcome {
                accepted: true,
                correct: Some(true)
            }
        );

        let o = classify_outcome(&r, false, &threshold(0.99), &scorer);
        assert!(o.accepted, "boundary is inclusive");

        let u = LogitRecord::new("u", None, vec![0.1, 0.2]);
        let o = classify_outcome(&u, true, &threshold(0.5), &scorer);
        assert_eq!(
            o,
            Outcome {
                accepted: false,
                correct: None
            }
        );
    }

    #[test]
    fn confusion_and_dar_examples() {
        let t = 0.5;
        let samples = [(0.9, true), (0.2, true), (0.8, false), (0.1, false), (0.95, true)];
        let outcomes: Vec<Outcome> = samples
            .iter()
            .map(|(c, ok)| Outcome {
                accepted: *c >= t,
                correct: Some(*ok),
            })
            .collect();
        let counts = confusion_counts(&outcomes, false).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts {
                tp: 2,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert_eq!(dar(&counts).unwrap(), 60.0);
        assert_eq!(der(&counts).unwrap(), 40.0);

        let rejected = vec![
            Outcome {
                accepted: false,
                correct: None
            };
            7
        ];
        let counts = confusion_counts(&rejected, true).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts {
                tn: 7,
                ..Default::default()
            }
        );
        assert_eq!(dar(&counts).unwrap(), 100.0);

        let accepted = vec![
            Outcome {
                accepted: true,
                correct: None
            };
            4
        ];
        let counts = confusion_counts(&accepted, true).unwrap();
        assert_eq!(
            counts,
            ConfusionCounts {
                fp: 4,
                ..Default::default()
            }
        );

        assert!(matches!(confusion_counts(&accepted, false), Err(Error::MixedOutcomes)));
        assert!(dar(&ConfusionCounts::default()).is_err());
        assert!(der(&ConfusionCounts::default()).is_err());

        assert_eq!(
            der(&ConfusionCounts {
                tn: 5,
                ..Default::default()
            })
            .unwrap(),
            0.0
        );
        assert_eq!(
            der(&ConfusionCounts {
                fp: 5,
                ..Default::default()
            })
            .unwrap(),
            100.0
        );
    }

    #[test]
    fn dar_der_sum_exactly() {
        for total in 1..60u64 {
            for good in 0..=total {
                let c = ConfusionCounts {
                    tp: good,
                    fn_: total - good,
                    ..Default::default()
                };
                assert_eq!(dar(&c).unwrap() + der(&c).unwrap(), 100.0, "{good}/{total}");
            }
        }
    }

    #[test]
    fn plain_accuracy_examples() {
        let rec = |l, z: [f64; 2]| LogitRecord::new("x", Some(l), z.to_vec());
        let all = [rec(0, [1.0, 0.0]), rec(1, [0.0, 1.0])];
        assert_eq!(plain_accuracy(&all).unwrap(), 100.0);
        let none = [rec(1, [1.0, 0.0]), rec(0, [0.0, 1.0])];
        assert_eq!(plain_accuracy(&none).unwrap(), 0.0);
        let three = [
            rec(0, [1.0, 0.0]),
            rec(1, [0.0, 1.0]),
            rec(0, [2.0, 1.0]),
            rec(0, [0.0, 1.0]),
        ];
        assert_eq!(plain_accuracy(&three).unwrap(), 75.0);
        assert!(plain_accuracy(&[]).is_err());
        assert!(plain_accuracy(&[LogitRecord::new("u", None, vec![0.0, 1.0])]).is_err());
    }

    #[test]
    fn auroc_examples() {
        assert!((auroc(&[0.9, 0.8, 0.4], &[0.7, 0.3]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap(), 0.5);
        assert!(auroc(&[], &[0.1]).is_err());
    }

    #[test]
    fn aupr_examples() {
        assert_eq!(aupr(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert!((aupr(&[0.9, 0.4], &[0.7]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        // all tied: a single block at precision = prevalence
        assert!((aupr(&[0.5, 0.5], &[0.5]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(aupr(&[0.1], &[]).is_err());
    }

    #[test]
    fn fpr_examples() {
        assert_eq!(fpr_at_tpr(&[0.9, 0.8], &[0.1, 0.2], 0.95).unwrap(), 0.0);
        assert_eq!(fpr_at_tpr(&[0.3, 0.3], &[0.3], 0.1).unwrap(), 1.0);
        let f = fpr_at_tpr(&[0.9, 0.8, 0.4, 0.3], &[0.85, 0.2], 0.75).unwrap();
        assert_eq!(f, 0.5);
        assert!(fpr_at_tpr(&[0.9], &[0.1], 0.0).is_err());
    }
}
