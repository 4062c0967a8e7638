//! Distribution induced by random oversampling and loss-optimal decisions.
//!
//! Oversampling with class weights `w` and `m` synthetic draws over `n`
//! originals shifts the class prior to
//! `P_a(Y=j) = n/(n+m) P(Y=j) + m/(n+m) w_j` while leaving `P(x | Y=j)`
//! intact. Posteriors therefore move by the prior ratio
//! `r_j = P_a(Y=j) / P(Y=j)` followed by renormalisation, and any decision
//! rule on one side has an equivalent rule on the other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether a distribution refers to the original or the augmented data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Original,
    Augmented,
}

/// Class prior `P(Y=k)`, `k = 0..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorVector {
    probs: Vec<f64>,
    kind: Kind,
}

impl PriorVector {
    pub fn new(probs: Vec<f64>, kind: Kind) -> Result<Self> {
        check_simplex(&probs, 1e-12, "prior")?;
        Ok(PriorVector { probs, kind })
    }

    /// `(1 - p1, p1)`.
    pub fn binary(p1: f64, kind: Kind) -> Result<Self> {
        Self::new(vec![1.0 - p1, p1], kind)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    fn require_positive(&self) -> Result<()> {
        if let Some(j) = self.probs.iter().position(|&p| p <= 0.0) {
            return Err(Error::invalid(format!(
                "{:?} prior has zero mass on class {j}",
                self.kind
            )));
        }
        Ok(())
    }
}

/// Class posterior `P(Y=k | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbVector {
    probs: Vec<f64>,
    kind: Kind,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>, kind: Kind) -> Result<Self> {
        check_simplex(&probs, 1e-9, "posterior")?;
        Ok(ProbVector { probs, kind })
    }

    pub fn binary(p1: f64, kind: Kind) -> Result<Self> {
        Self::new(vec![1.0 - p1, p1], kind)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// `P(Y=1 | x)`.
    pub fn positive(&self) -> f64 {
        self.probs[1]
    }
}

fn check_simplex(probs: &[f64], tol: f64, what: &str) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::invalid(format!("{what} needs at least two classes")));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!("{what} entries must lie in [0, 1]")));
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::invalid(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// `n` original observations, `m` synthetic draws with class weights `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub n: usize,
    pub m: usize,
    weights: Vec<f64>,
}

impl AugmentationPlan {
    pub fn new(n: usize, m: usize, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("augmentation plan needs n > 0"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("class weights must be non-negative"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("class weights sum to {s}, not 1")));
        }
        Ok(AugmentationPlan { n, m, weights })
    }

    /// All synthetic draws go to `class` (vanilla oversampling).
    pub fn single_class(n: usize, m: usize, class: usize, n_classes: usize) -> Result<Self> {
        let mut w = vec![0.0; n_classes];
        *w.get_mut(class)
            .ok_or_else(|| Error::invalid(format!("class {class} out of range")))? = 1.0;
        Self::new(n, m, w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Misclassification costs `L(k, j)`: true class `k`, predicted `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl LossMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("loss matrix must be square with K >= 2"));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::invalid("losses must be finite and non-negative"));
        }
        if (0..k).any(|i| entries[i * k + i] != 0.0) {
            return Err(Error::invalid("diagonal losses must be exactly 0"));
        }
        if entries.iter().all(|&e| e == 0.0) {
            return Err(Error::invalid("at least one off-diagonal loss must be positive"));
        }
        Ok(LossMatrix { k, entries })
    }

    /// `L(k, j) = 1[k != j]`.
    pub fn zero_one(k: usize) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|r| (0..k).map(|c| if r == c { 0.0 } else { 1.0 }).collect())
                .collect(),
        )
    }

    /// Binary loss with `L(0,1)` (false positive) and `L(1,0)` (false negative).
    pub fn binary(false_positive: f64, false_negative: f64) -> Result<Self> {
        Self::new(vec![vec![0.0, false_positive], vec![false_negative, 0.0]])
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> f64 {
        self.entries[truth * self.k + predicted]
    }
}

/// Predict class 1 iff `P(Y=1|x) >= cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    cutoff: f64,
}

impl ThresholdRule {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cutoff) {
            return Err(Error::invalid(format!("cutoff {cutoff} outside [0, 1]")));
        }
        Ok(ThresholdRule { cutoff })
    }

    pub fn half() -> Self {
        ThresholdRule { cutoff: 0.5 }
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn classify(&self, p1: f64) -> u8 {
        u8::from(p1 >= self.cutoff)
    }
}

pub fn augmented_prior(orig: &PriorVector, plan: &AugmentationPlan) -> Result<PriorVector> {
    if orig.kind != Kind::Original {
        return Err(Error::invalid("augmented_prior expects an original prior"));
    }
    if plan.weights.len() != orig.n_classes() {
        return Err(Error::invalid("plan weights and prior differ in class count"));
    }
    let total = (plan.n + plan.m) as f64;
    let a = plan.n as f64 / total;
    let b = plan.m as f64 / total;
    let probs = orig
        .probs
        .iter()
        .zip(&plan.weights)
        .map(|(p, w)| a * p + b * w)
        .collect();
    PriorVector::new(probs, Kind::Augmented)
}

/// Oversampling size that makes a binary sample 50-50 when every draw is of
/// class 1: `round(n (P(Y=0) - P(Y=1)))`.
pub fn example1_m(n: usize, prior: &PriorVector) -> Result<usize> {
    if prior.n_classes() != 2 {
        return Err(Error::invalid("example1_m needs a binary prior"));
    }
    let (p0, p1) = (prior.probs[0], prior.probs[1]);
    if p1 > p0 {
        return Err(Error::invalid(format!(
            "class 1 is not the minority (P(Y=1) = {p1})"
        )));
    }
    Ok((n as f64 * (p0 - p1)).round() as usize)
}

fn reweight(probs: &[f64], ratios: impl Iterator<Item = f64>) -> Vec<f64> {
    let scaled: Vec<f64> = probs.iter().zip(ratios).map(|(p, r)| p * r).collect();
    let total: f64 = scaled.iter().sum();
    scaled.into_iter().map(|s| s / total).collect()
}

fn check_shapes(cond: &ProbVector, a: &PriorVector, b: &PriorVector) -> Result<()> {
    if cond.probs.len() != a.n_classes() || cond.probs.len() != b.n_classes() {
        return Err(Error::invalid("posterior and priors differ in class count"));
    }
    Ok(())
}

/// `P(Y=j|x) -> P_a(Y=j|x)`.
pub fn remap_to_augmented(
    cond: &ProbVector,
    orig_prior: &PriorVector,
    aug_prior: &PriorVector,
) -> Result<ProbVector> {
    if cond.kind != Kind::Original {
        return Err(Error::invalid("remap_to_augmented expects an original posterior"));
    }
    check_shapes(cond, orig_prior, aug_prior)?;
    orig_prior.require_positive()?;
    let ratios = aug_prior
        .probs
        .iter()
        .zip(&orig_prior.probs)
        .map(|(a, o)| a / o);
    Ok(ProbVector {
        probs: reweight(&cond.probs, ratios),
        kind: Kind::Augmented,
    })
}

/// `P_a(Y=j|x) -> P(Y=j|x)`, the inverse of [`remap_to_augmented`].
pub fn remap_to_original(
    cond: &ProbVector,
    orig_prior: &PriorVector,
    aug_prior: &PriorVector,
) -> Result<ProbVector> {
    if cond.kind != Kind::Augmented {
        return Err(Error::invalid("remap_to_original expects an augmented posterior"));
    }
    check_shapes(cond, orig_prior, aug_prior)?;
    aug_prior.require_positive()?;
    let ratios = orig_prior
        .probs
        .iter()
        .zip(&aug_prior.probs)
        .map(|(o, a)| o / a);
    Ok(ProbVector {
        probs: reweight(&cond.probs, ratios),
        kind: Kind::Original,
    })
}

/// `argmin_j sum_k L(k, j) P(Y=k|x)`. Equal expected losses resolve to the
/// smaller class index.
pub fn bayes_classify(cond: &ProbVector, loss: &LossMatrix) -> Result<usize> {
    let k = loss.n_classes();
    if cond.probs.len() != k {
        return Err(Error::invalid("posterior and loss differ in class count"));
    }
    let mut best = (0, f64::INFINITY);
    for j in 0..k {
        let cost: f64 = (0..k).map(|t| loss.get(t, j) * cond.probs[t]).sum();
        if cost < best.1 {
            best = (j, cost);
        }
    }
    Ok(best.0)
}

/// Binary Bayes rule as a cutoff: `L(0,1) / (L(0,1) + L(1,0))`.
pub fn loss_to_threshold(loss: &LossMatrix) -> Result<ThresholdRule> {
    if loss.n_classes() != 2 {
        return Err(Error::invalid("threshold form exists only for K = 2"));
    }
    let fp = loss.get(0, 1);
    let fneg = loss.get(1, 0);
    if fp + fneg == 0.0 {
        return Err(Error::invalid("both off-diagonal losses are zero"));
    }
    ThresholdRule::new(fp / (fp + fneg))
}

/// `L'(k, j) = L(k, j) P_a(Y=k) / P(Y=k)`: the loss under which original
/// posteriors reproduce the augmented Bayes classifier.
pub fn equivalent_loss(
    loss: &LossMatrix,
    orig_prior: &PriorVector,
    aug_prior: &PriorVector,
) -> Result<LossMatrix> {
    let k = loss.n_classes();
    if orig_prior.n_classes() != k || aug_prior.n_classes() != k {
        return Err(Error::invalid("loss and priors differ in class count"));
    }
    orig_prior.require_positive()?;
    let entries = (0..k)
        .flat_map(|t| {
            let r = aug_prior.probs[t] / orig_prior.probs[t];
            (0..k).map(move |j| (t, j, r))
        })
        .map(|(t, j, r)| loss.get(t, j) * r)
        .collect();
    Ok(LossMatrix { k, entries })
}

/// Balanced-accuracy-optimal cutoff on original posteriors: `P(Y=1)`.
pub fn corollary1_threshold(orig_prior: &PriorVector) -> Result<ThresholdRule> {
    if orig_prior.n_classes() != 2 {
        return Err(Error::invalid("cutoff form needs a binary prior"));
    }
    ThresholdRule::new(orig_prior.probs[1])
}
