//! Classification metrics, ROC/AUC, Brier score and validation-set cutoff
//! selection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::{remap_to_original, Kind, PriorVector, ProbVector, ThresholdRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_predictions(predicted: &[u8], labels: &[u8]) -> Result<Self> {
        check_lengths(predicted.len(), labels.len())?;
        let mut c = ConfusionCounts::default();
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p, y) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (0, 1) => c.fn_ += 1,
                _ => return Err(Error::invalid("labels and predictions must be 0 or 1")),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{a} scores but {b} labels")));
    }
    if a == 0 {
        return Err(Error::Empty("no points to evaluate".into()));
    }
    Ok(())
}

pub fn sensitivity(c: &ConfusionCounts) -> Result<f64> {
    if c.positives() == 0 {
        return Err(Error::MissingClass(1));
    }
    Ok(c.tp as f64 / c.positives() as f64)
}

pub fn specificity(c: &ConfusionCounts) -> Result<f64> {
    if c.negatives() == 0 {
        return Err(Error::MissingClass(0));
    }
    Ok(c.tn as f64 / c.negatives() as f64)
}

pub fn balanced_accuracy(c: &ConfusionCounts) -> Result<f64> {
    Ok((sensitivity(c)? + specificity(c)?) / 2.0)
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    if c.total() == 0 {
        return Err(Error::Empty("no points to evaluate".into()));
    }
    Ok((c.tp + c.tn) as f64 / c.total() as f64)
}

/// F1 of class 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1 {
    pub value: f64,
    /// No predicted and no actual positives; `value` is then 0.
    pub undefined: bool,
}

pub fn f1(c: &ConfusionCounts) -> F1 {
    let den = 2 * c.tp + c.fp + c.fn_;
    if den == 0 {
        return F1 {
            value: 0.0,
            undefined: true,
        };
    }
    F1 {
        value: (2 * c.tp) as f64 / den as f64,
        undefined: false,
    }
}

/// `(aug - base) / base`.
pub fn percentage_gain(aug: f64, base: f64) -> Result<f64> {
    if !(base > 0.0) {
        return Err(Error::invalid(format!("percentage gain needs a positive baseline, got {base}")));
    }
    Ok((aug - base) / base)
}

/// Metric whose percentage gain is tracked across experiment cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BalancedAccuracy,
    F1,
    Sensitivity,
    Specificity,
    Accuracy,
    Auc,
    Brier,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::BalancedAccuracy,
        Metric::F1,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::Accuracy,
        Metric::Auc,
        Metric::Brier,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::F1 => "f1",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Accuracy => "accuracy",
            Metric::Auc => "auc",
            Metric::Brier => "brier",
        }
    }

    pub fn of(self, report: &MetricReport) -> f64 {
        match self {
            Metric::BalancedAccuracy => report.balanced_accuracy,
            Metric::F1 => report.f1,
            Metric::Sensitivity => report.sensitivity,
            Metric::Specificity => report.specificity,
            Metric::Accuracy => report.accuracy,
            Metric::Auc => report.auc,
            Metric::Brier => report.brier,
        }
    }

    /// Percentage gain oriented so that positive means the augmented model
    /// is better: the Brier score is a loss, so its gain is `(base - aug) / base`.
    pub fn gain(self, aug: f64, base: f64) -> Result<f64> {
        match self {
            Metric::Brier => percentage_gain(aug, base).map(|g| -g),
            _ => percentage_gain(aug, base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// `(fpr, tpr)` knots from `(0, 0)` to `(1, 1)`, non-decreasing in both.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let ok = points.len() >= 2
            && points[0] == (0.0, 0.0)
            && *points.last().expect("non-empty") == (1.0, 1.0)
            && points.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
        if !ok {
            return Err(Error::invalid("ROC points must rise monotonically from (0,0) to (1,1)"));
        }
        Ok(RocCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["fpr", "tpr"])?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_probas(probas: &[f64]) -> Result<()> {
    if let Some(p) = probas.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// ROC by a descending sweep over scores with ties grouped, and its
/// trapezoidal area. The area is accumulated in integers, so it equals the
/// Mann-Whitney pair statistic (ties counting one half) exactly.
pub fn roc_and_auc(scores: &[f64], labels: &[u8]) -> Result<(RocCurve, f64)> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::MissingClass(1));
    }
    if neg == 0 {
        return Err(Error::MissingClass(0));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area in units of 1 / (pos * neg)
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok((RocCurve::new(points)?, auc))
}

pub fn brier_score(probas: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(probas.len(), labels.len())?;
    check_probas(probas)?;
    let sse: f64 = probas
        .iter()
        .zip(labels)
        .map(|(p, &y)| (f64::from(y) - p).powi(2))
        .sum();
    Ok(sse / probas.len() as f64)
}

/// Criterion maximised when picking a cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    BalancedAccuracy,
    F1,
    Accuracy,
}

impl Objective {
    fn score(self, c: &ConfusionCounts) -> Result<f64> {
        match self {
            Objective::BalancedAccuracy => balanced_accuracy(c),
            Objective::F1 => Ok(f1(c).value),
            Objective::Accuracy => accuracy(c),
        }
    }
}

/// Exact maximiser of `objective` over the cutoffs `{0}`, midpoints of
/// consecutive distinct scores, and `{1}`; ties go to the smallest cutoff.
pub fn optimize_threshold(probas: &[f64], labels: &[u8], objective: Objective) -> Result<ThresholdRule> {
    check_lengths(probas.len(), labels.len())?;
    check_probas(probas)?;
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&p, &y) in probas.iter().zip(labels) {
        match y {
            1 => pos.push(p),
            0 => neg.push(p),
            _ => return Err(Error::invalid("labels must be 0 or 1")),
        }
    }
    if pos.is_empty() {
        return Err(Error::MissingClass(1));
    }
    if neg.is_empty() {
        return Err(Error::MissingClass(0));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut unique: Vec<f64> = probas.to_vec();
    unique.sort_by(f64::total_cmp);
    unique.dedup();

    let mut candidates = Vec::with_capacity(unique.len() + 1);
    candidates.push(0.0);
    candidates.extend(unique.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(1.0);

    let at_or_above = |sorted: &[f64], c: f64| sorted.len() - sorted.partition_point(|&s| s < c);
    let mut best: Option<(f64, f64)> = None;
    for c in candidates {
        let tp = at_or_above(&pos, c);
        let fp = at_or_above(&neg, c);
        let counts = ConfusionCounts {
            tp,
            fp,
            tn: neg.len() - fp,
            fn_: pos.len() - tp,
        };
        let v = objective.score(&counts)?;
        match best {
            Some((bv, bc)) if v < bv || (v == bv && c >= bc) => {}
            _ => best = Some((v, c)),
        }
    }
    ThresholdRule::new(best.expect("at least two candidates").1)
}

/// Maps augmented-scale class-1 probabilities back to the original scale.
pub fn remap_scores_for_scoring(
    aug_probas: &[f64],
    orig_prior: &PriorVector,
    aug_prior: &PriorVector,
) -> Result<Vec<f64>> {
    aug_probas
        .iter()
        .map(|&p| {
            let v = ProbVector::binary(p, Kind::Augmented)?;
            Ok(remap_to_original(&v, orig_prior, aug_prior)?.positive())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub balanced_accuracy: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub f1_undefined: bool,
    pub auc: f64,
    pub brier: f64,
}

impl MetricReport {
    /// Threshold metrics come from `rule` applied to `class_probas`; AUC and
    /// Brier from `scoring_probas`, which for augmented models are the
    /// remapped original-scale estimates.
    pub fn compute(
        class_probas: &[f64],
        rule: &ThresholdRule,
        scoring_probas: &[f64],
        labels: &[u8],
    ) -> Result<Self> {
        check_lengths(class_probas.len(), labels.len())?;
        let predicted: Vec<u8> = class_probas.iter().map(|&p| rule.classify(p)).collect();
        let c = ConfusionCounts::from_predictions(&predicted, labels)?;
        let f = f1(&c);
        Ok(MetricReport {
            balanced_accuracy: balanced_accuracy(&c)?,
            accuracy: accuracy(&c)?,
            sensitivity: sensitivity(&c)?,
            specificity: specificity(&c)?,
            f1: f.value,
            f1_undefined: f.undefined,
            auc: roc_and_auc(scoring_probas, labels)?.1,
            brier: brier_score(scoring_probas, labels)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
