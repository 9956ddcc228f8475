//! ROC analysis, score-equivalence checks, decision-threshold estimation and
//! the differential-privacy bound on attack success.
//!
//! A sample is predicted to be a member when its score is strictly greater
//! than the threshold.

use crate::attacks::{audit_model, AttackConfig, AttackRegistry};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::numeric::{prior_log_odds, sigmoid};
use crate::shadow::ShadowPool;
use crate::signals::SignalMode;

/// Staircase ROC curve from sweeping every distinct score.
///
/// `points[i]` is reached by the threshold `thresholds[i]`: the first point
/// is `(0, 0)` at the maximum score and the last is `(1, 1)` just below the
/// minimum score.
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

impl RocCurve {
    /// CSV with header `fpr,tpr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for &(f, t) in &self.points {
            s.push_str(&format!("{},{}\n", crate::numeric::fmt_f64(f), crate::numeric::fmt_f64(t)));
        }
        s
    }
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::dim(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {i} is NaN")));
    }
    Ok(())
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    check_scores(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid("ROC needs both members and non-members"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let max = scores[order[0]];
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![max];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the Mann-Whitney count, kept in integers so ties are exact.
    let mut twice_wins: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut block_tp, mut block_fp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                block_tp += 1;
            } else {
                block_fp += 1;
            }
            i += 1;
        }
        twice_wins += u128::from(block_fp) * u128::from(2 * tp + block_tp);
        tp += block_tp;
        fp += block_fp;
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(if i < order.len() { scores[order[i]] } else { s.next_down() });
    }
    let auc = twice_wins as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(RocCurve {
        points,
        thresholds,
        auc,
        positives,
        negatives,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub tpr: f64,
    pub fpr: f64,
    pub threshold: f64,
}

/// The ROC point with the largest FPR not exceeding `target_fpr`.
pub fn tpr_at_fpr(roc: &RocCurve, target_fpr: f64) -> Result<OperatingPoint> {
    if !(0.0..=1.0).contains(&target_fpr) {
        return Err(Error::invalid(format!("target FPR {target_fpr} not in [0, 1]")));
    }
    // FPR is nondecreasing along the sweep; take the last admissible point.
    let i = roc.points.partition_point(|&(f, _)| f <= target_fpr) - 1;
    Ok(OperatingPoint {
        tpr: roc.points[i].1,
        fpr: roc.points[i].0,
        threshold: roc.thresholds[i],
    })
}

/// Fraction of the labelled negatives (or positives) with `score > threshold`.
pub fn rate_above(scores: &[f64], labels: &[bool], member: bool, threshold: f64) -> Result<f64> {
    check_scores(scores, labels)?;
    let total = labels.iter().filter(|&&l| l == member).count();
    if total == 0 {
        return Err(Error::Empty("class for rate"));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|&(&s, &l)| l == member && s > threshold)
        .count();
    Ok(hits as f64 / total as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Largest `b_j − b_i` over pairs with `a_i > a_j`; zero when concordant.
    pub max_violation: f64,
}

/// Whether `a` and `b` rank every pair concordantly, up to ties.
pub fn check_equivalence(a: &[f64], b: &[f64]) -> Result<Equivalence> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("score vectors of length {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[i].total_cmp(&a[j]));
    let mut before_max = f64::NEG_INFINITY;
    let mut violation: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let start = i;
        let mut block_min = f64::INFINITY;
        let mut block_max = f64::NEG_INFINITY;
        while i < order.len() && a[order[i]] == a[order[start]] {
            block_min = block_min.min(b[order[i]]);
            block_max = block_max.max(b[order[i]]);
            i += 1;
        }
        if block_min < before_max {
            violation = violation.max(before_max - block_min);
        }
        before_max = before_max.max(block_max);
    }
    Ok(Equivalence {
        equivalent: violation == 0.0,
        max_violation: violation,
    })
}

/// Upper bound on the posterior membership probability of any attack
/// against an `ε`-differentially-private training algorithm.
pub fn dp_bound(epsilon: f64, lambda: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must be >= 0")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda {lambda} not in (0, 1)")));
    }
    Ok(sigmoid(epsilon + prior_log_odds(lambda)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdEstimate {
    pub target_fpr: f64,
    pub thresholds: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

impl ThresholdEstimate {
    pub fn from_thresholds(target_fpr: f64, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Empty("threshold list"));
        }
        let mean = thresholds.iter().sum::<f64>() / thresholds.len() as f64;
        let max = thresholds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            target_fpr,
            thresholds,
            mean,
            max,
        })
    }
}

/// Where simulated targets come from and how they are attacked.
#[derive(Clone, Copy)]
pub struct ThresholdSetup<'a> {
    pub pool: &'a ShadowPool,
    pub graph: &'a Graph,
    /// Nodes scored for every simulated target.
    pub targets: &'a [usize],
    pub signal_mode: SignalMode,
}

/// Treats pool models `0..simulated` in turn as targets with known
/// membership, attacks each with the remaining models, and records the
/// threshold that reaches `target_fpr` on it.
pub fn estimate_threshold(
    setup: &ThresholdSetup<'_>,
    registry: &AttackRegistry,
    cfg: &AttackConfig,
    target_fpr: f64,
    simulated: usize,
) -> Result<ThresholdEstimate> {
    let pool = setup.pool;
    if simulated == 0 {
        return Err(Error::invalid("need at least one simulated target"));
    }
    if pool.len() < 2 || simulated > pool.len() {
        return Err(Error::InsufficientModels(format!(
            "{simulated} simulated targets from a pool of {}",
            pool.len()
        )));
    }
    let thresholds = (0..simulated)
        .map(|i| {
            let shadows = pool.without(i);
            let scores = audit_model(
                registry,
                cfg,
                &pool.models[i],
                &shadows,
                setup.graph,
                setup.targets,
                &pool.membership[i],
                setup.signal_mode,
            )?;
            let roc = roc_auc(&scores.scores, &scores.members)?;
            Ok(tpr_at_fpr(&roc, target_fpr)?.threshold)
        })
        .collect::<Result<Vec<f64>>>()?;
    ThresholdEstimate::from_thresholds(target_fpr, thresholds)
}
