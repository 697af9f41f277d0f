//! Detection quality: confusion counts, threshold sweeps, ROC/AUC, the
//! k-consecutive alarm filter, and detection latency from a simulation log.
//!
//! A score predicts positive when `score >= threshold`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::sim::EventLog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no scores")]
    Empty,
    #[error("scores must contain both positive and negative labels")]
    SingleClass,
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledScore {
    pub score: f64,
    pub label: bool,
}

impl LabeledScore {
    pub fn new(score: f64, label: bool) -> Self {
        Self { score, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check(scores: &[LabeledScore]) -> Result<(), MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    match scores.iter().position(|s| !s.score.is_finite()) {
        Some(i) => Err(MetricsError::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn confusion_at(scores: &[LabeledScore], threshold: f64) -> Result<Confusion, MetricsError> {
    check(scores)?;
    let mut c = Confusion::default();
    for s in scores {
        match (s.score >= threshold, s.label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// No positive predictions; precision reported as 1.0.
    pub precision_undefined: bool,
    /// No positive labels; recall reported as 1.0.
    pub recall_undefined: bool,
    pub confusion: Confusion,
}

impl ThresholdReport {
    pub fn from_confusion(threshold: f64, c: Confusion) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        Self {
            threshold,
            accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            precision_undefined: c.tp + c.fp == 0,
            recall_undefined: c.tp + c.fn_ == 0,
            confusion: c,
        }
    }
}

pub fn sweep(scores: &[LabeledScore], thresholds: &[f64]) -> Result<Vec<ThresholdReport>, MetricsError> {
    thresholds.iter().map(|&t| Ok(ThresholdReport::from_confusion(t, confusion_at(scores, t)?))).collect()
}

/// Inclusive `start:stop:step` grid, robust to accumulated float error.
pub fn threshold_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if start == stop {
        return vec![start];
    }
    if !(step > 0.0) || stop < start {
        return Vec::new();
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores at or above this predict positive. The first point uses +∞.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// From (0, 0) at +∞ down through every distinct score to (1, 1).
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub fn roc_auc(scores: &[LabeledScore]) -> Result<RocCurve, MetricsError> {
    check(scores)?;
    let pos = scores.iter().filter(|s| s.label).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0, precision: 1.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].score;
        while i < sorted.len() && sorted[i].score == threshold {
            if sorted[i].label {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

/// Threshold maximizing Youden's J = tpr − fpr, preferring the larger
/// threshold on ties.
pub fn operating_point(curve: &RocCurve) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for p in curve.points.iter().filter(|p| p.threshold.is_finite()) {
        let j = p.tpr - p.fpr;
        match best {
            Some((bj, bt)) if j < bj || (j == bj && p.threshold <= bt) => {}
            _ => best = Some((j, p.threshold)),
        }
    }
    best.map_or(f64::INFINITY, |(_, t)| t)
}

/// Raises an alarm at `i` only when predictions `i-k+1..=i` are all positive.
pub fn smooth_two_sample(predictions: &[bool], k: usize) -> Vec<bool> {
    let k = k.max(1);
    let mut run = 0usize;
    predictions
        .iter()
        .map(|&p| {
            run = if p { run + 1 } else { 0 };
            run >= k
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Detected(f64),
    NotDetected,
}

/// Per intruder agent: time from its first transmission to the first
/// alarm (at any observer) on the id it transmits under.
pub fn detection_latency(log: &EventLog) -> BTreeMap<u16, Latency> {
    let mut out = BTreeMap::new();
    for agent in log.agents.iter().filter(|a| a.behavior.is_intruder()) {
        let first_tx = log.tx().find(|t| t.agent_id == agent.drone_id).map(|t| t.tick);
        let latency = first_tx
            .and_then(|tx_tick| {
                log.alarms()
                    .find(|a| a.drone_id == agent.claimed_id && a.tick >= tx_tick)
                    .map(|a| (a.tick - tx_tick) as f64 * log.tick_dt)
            })
            .map_or(Latency::NotDetected, Latency::Detected);
        out.insert(agent.drone_id, latency);
    }
    out
}

/// One score per verification: |RSSI residual|, labeled by whether the
/// transmitting agent is an intruder.
pub fn residual_scores(log: &EventLog) -> Vec<LabeledScore> {
    log.verifications()
        .map(|v| {
            let intruder = log.agent(v.agent_id).is_some_and(|a| a.behavior.is_intruder());
            LabeledScore::new(v.outcome.residual.abs(), intruder)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ls(scores: &[f64], labels: &[u8]) -> Vec<LabeledScore> {
        scores.iter().zip(labels).map(|(&s, &l)| LabeledScore::new(s, l == 1)).collect()
    }

    /// P(random positive outranks random negative), ties ½.
    fn pairwise_auc(scores: &[LabeledScore]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for p in scores.iter().filter(|s| s.label) {
            for n in scores.iter().filter(|s| !s.label) {
                pairs += 1.0;
                if p.score > n.score {
                    wins += 1.0;
                } else if p.score == n.score {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn confusion_examples() {
        let s = ls(&[0.9, 0.8, 0.7, 0.6], &[1, 1, 0, 0]);
        assert_eq!(confusion_at(&s, 0.75).unwrap(), Confusion { tp: 2, fp: 0, tn: 2, fn_: 0 });
        let low = confusion_at(&s, 0.1).unwrap();
        assert_eq!((low.tn, low.fn_), (0, 0));
        let high = confusion_at(&s, 2.0).unwrap();
        assert_eq!((high.tp, high.fp), (0, 0));
        assert_eq!(confusion_at(&[], 0.5), Err(MetricsError::Empty));
        // Inclusive threshold.
        assert_eq!(confusion_at(&s, 0.8).unwrap().tp, 2);
    }

    #[test]
    fn sweep_hand_case() {
        let s = ls(&[0.9, 0.8, 0.7, 0.6], &[1, 1, 0, 0]);
        let r = sweep(&s, &[0.65, 0.75, 0.85]).unwrap();
        assert_eq!(r.iter().map(|x| x.recall).collect::<Vec<_>>(), vec![1.0, 1.0, 0.5]);
        assert_eq!(r[1].accuracy, 1.0);
        assert_eq!(r[1].precision, 1.0);
        assert_eq!(r[0].precision, 2.0 / 3.0);
    }

    #[test]
    fn undefined_ratios_flagged() {
        let s = ls(&[0.2, 0.1], &[0, 0]);
        let r = sweep(&s, &[0.5]).unwrap()[0];
        assert!(r.precision_undefined && r.recall_undefined);
        assert_eq!((r.precision, r.recall, r.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn grid_matches_table_layout() {
        assert_eq!(threshold_grid(60.0, 85.0, 5.0), vec![60.0, 65.0, 70.0, 75.0, 80.0, 85.0]);
        assert_eq!(threshold_grid(0.1, 0.3, 0.1).len(), 3);
        assert_eq!(threshold_grid(5.0, 5.0, 1.0), vec![5.0]);
        assert!(threshold_grid(5.0, 1.0, 1.0).is_empty());
    }

    #[test]
    fn auc_examples() {
        let sep = ls(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(roc_auc(&sep).unwrap().auc, 1.0);
        let tied = ls(&[0.5; 6], &[1, 0, 1, 0, 0, 1]);
        assert_eq!(roc_auc(&tied).unwrap().auc, 0.5);
        let hand = ls(&[0.9, 0.6, 0.7, 0.3], &[1, 1, 0, 0]);
        assert_eq!(roc_auc(&hand).unwrap().auc, 0.75);
        assert_eq!(pairwise_auc(&hand), 0.75);
        assert_eq!(roc_auc(&ls(&[0.1, 0.2], &[1, 1])), Err(MetricsError::SingleClass));
    }

    #[test]
    fn operating_point_examples() {
        // Perfect separation: smallest positive score.
        let sep = ls(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]);
        assert_eq!(operating_point(&roc_auc(&sep).unwrap()), 0.8);

        // J = 0.5 at both 0.9 and 0.6 (exhaustive); tie goes to 0.9.
        let hand = ls(&[0.9, 0.6, 0.7, 0.3], &[1, 1, 0, 0]);
        let brute = [0.9, 0.7, 0.6, 0.3].map(|t| {
            let c = confusion_at(&hand, t).unwrap();
            (c.tp as f64 / 2.0 - c.fp as f64 / 2.0, t)
        });
        assert_eq!(brute.map(|b| b.0), [0.5, 0.0, 0.5, 0.0]);
        assert_eq!(operating_point(&roc_auc(&hand).unwrap()), 0.9);

        let tied = ls(&[0.5; 4], &[1, 0, 1, 0]);
        assert_eq!(operating_point(&roc_auc(&tied).unwrap()), 0.5);
    }

    #[test]
    fn two_sample_examples() {
        let raw = [true, false, true, true, true];
        assert_eq!(smooth_two_sample(&raw, 2), vec![false, false, false, true, true]);
        assert_eq!(smooth_two_sample(&raw, 1), raw.to_vec());
    }

    #[test]
    fn two_sample_alarm_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 1_000_000;
        let raw: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.1).collect();
        let alarms = smooth_two_sample(&raw, 2).iter().filter(|&&a| a).count() as f64 / n as f64;
        let sd = (0.01f64 * 0.99 / n as f64).sqrt();
        assert!((alarms - 0.01).abs() <= 3.0 * sd, "{alarms}");
    }

    fn score_set() -> impl Strategy<Value = Vec<LabeledScore>> {
        prop::collection::vec(((0u8..20).prop_map(|x| x as f64 / 4.0), any::<bool>()), 2..200)
            .prop_map(|v| v.into_iter().map(|(s, l)| LabeledScore::new(s, l)).collect())
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pairwise(scores in score_set()) {
            prop_assume!(scores.iter().any(|s| s.label) && scores.iter().any(|s| !s.label));
            let auc = roc_auc(&scores).unwrap().auc;
            prop_assert!((auc - pairwise_auc(&scores)).abs() < 1e-9);
        }

        #[test]
        fn rates_monotone_in_threshold(scores in score_set()) {
            let grid = threshold_grid(-1.0, 6.0, 0.25);
            let reports = sweep(&scores, &grid).unwrap();
            for w in reports.windows(2) {
                let (a, b) = (w[0].confusion, w[1].confusion);
                prop_assert!(b.tp <= a.tp);
                prop_assert!(b.fp <= a.fp);
                prop_assert_eq!(w[0].accuracy, (a.tp + a.tn) as f64 / a.total() as f64);
                prop_assert_eq!(a.total(), scores.len());
            }
        }

        #[test]
        fn smoothing_is_subset(raw in prop::collection::vec(any::<bool>(), 0..100), k in 1usize..5) {
            let alarms = smooth_two_sample(&raw, k);
            for (i, (&a, &r)) in alarms.iter().zip(&raw).enumerate() {
                prop_assert!(!a || r);
                prop_assert!(!a || i + 1 >= k);
            }
        }
    }
}
