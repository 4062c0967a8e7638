//! Minority-class oversampling.
//!
//! Text-space methods (random oversampling, EDA, IOWA) extend a
//! [`LabeledCorpus`]; vector-space methods (ROSE, SMOTE, Borderline SMOTE)
//! extend a [`DocTermMatrix`]. Every method only appends minority
//! observations, so the original rows are left in place and in order.

mod eda;
mod iowa;
mod random;
mod rose;
mod smote;

use serde::{Deserialize, Serialize};

pub use eda::{eda_augment, eda_transform, EdaConfig, EdaVariant, SynonymLexicon, DEFAULT_STOPWORDS};
pub use iowa::{iowa_fit, iowa_generate, IowaModel, IowaVariant};
pub use random::random_oversample;
pub use rose::{rose_bandwidths, rose_oversample, RoseConfig};
pub use smote::{smote_interpolate, smote_oversample, SmoteConfig};

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};
use crate::theory::AugmentationPlan;
use crate::vectorize::DocTermMatrix;

/// Target minority share and seed for one augmentation replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentRequest {
    pub target_ratio: f64,
    pub seed: u64,
}

impl AugmentRequest {
    pub fn new(target_ratio: f64, seed: u64) -> Result<Self> {
        if !(target_ratio > 0.0 && target_ratio <= 1.0) {
            return Err(Error::invalid(format!(
                "target ratio {target_ratio} outside (0, 1]"
            )));
        }
        Ok(AugmentRequest { target_ratio, seed })
    }
}

/// What an augmentation run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentMeta {
    pub method: String,
    pub minority_label: u8,
    /// Number of synthetic minority observations appended.
    pub synthetic: usize,
    pub seed: u64,
    /// Borderline SMOTE found no misclassified seeds and ran plain SMOTE.
    #[serde(default)]
    pub borderline_fallback: bool,
    /// EDA outputs emitted unchanged for lack of lexicon coverage.
    #[serde(default)]
    pub unchanged: usize,
}

impl AugmentMeta {
    fn new(method: impl Into<String>, minority_label: u8, synthetic: usize, seed: u64) -> Self {
        AugmentMeta {
            method: method.into(),
            minority_label,
            synthetic,
            seed,
            borderline_fallback: false,
            unchanged: 0,
        }
    }
}

/// Smallest `s >= 0` with `(n_min + s) / (n + s) >= target`.
pub fn synthetic_needed(n: usize, n_min: usize, target: f64) -> Result<usize> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::invalid(format!("target ratio {target} outside (0, 1]")));
    }
    if n_min > n {
        return Err(Error::invalid("minority count exceeds sample size"));
    }
    if target >= 1.0 {
        return if n_min == n {
            Ok(0)
        } else {
            Err(Error::invalid("a ratio of 1 is unreachable while the majority class is present"))
        };
    }
    let reached = |s: usize| (n_min + s) as f64 >= target * (n + s) as f64 - 1e-9;
    let mut s = ((target * n as f64 - n_min as f64) / (1.0 - target)).ceil().max(0.0) as usize;
    while s > 0 && reached(s - 1) {
        s -= 1;
    }
    while !reached(s) {
        s += 1;
    }
    Ok(s)
}

/// Representation an augmentation method works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Text,
    Counts,
}

#[derive(Debug, Clone)]
pub enum AugmentMethod {
    RandomOversampling,
    Rose(RoseConfig),
    Smote(SmoteConfig),
    Eda(EdaConfig),
    Iowa(IowaVariant),
}

impl AugmentMethod {
    /// Stable label used in reports and seed derivation.
    pub fn label(&self) -> String {
        match self {
            AugmentMethod::RandomOversampling => "random_oversampling".into(),
            AugmentMethod::Rose(c) => format!("rose_{}", c.shrinkage),
            AugmentMethod::Smote(c) if c.borderline => "borderline_smote".into(),
            AugmentMethod::Smote(_) => "smote".into(),
            AugmentMethod::Eda(c) => format!("eda_{}", c.variant.label()),
            AugmentMethod::Iowa(v) => format!("iowa_{}", v.label()),
        }
    }

    pub fn space(&self) -> Space {
        match self {
            AugmentMethod::Rose(_) | AugmentMethod::Smote(_) => Space::Counts,
            _ => Space::Text,
        }
    }
}

/// Training data in whichever representation a method needs.
#[derive(Debug, Clone)]
pub enum TrainingData {
    Text(LabeledCorpus),
    Counts(DocTermMatrix),
}

/// Appends the minimal number of synthetic minority observations that lifts
/// the minority share to `req.target_ratio`.
pub fn balance_to_ratio(
    data: &TrainingData,
    method: &AugmentMethod,
    req: &AugmentRequest,
) -> Result<(TrainingData, AugmentMeta)> {
    match (data, method.space()) {
        (TrainingData::Text(corpus), Space::Text) => {
            let (out, meta) = balance_text(corpus, method, req)?;
            Ok((TrainingData::Text(out), meta))
        }
        (TrainingData::Counts(matrix), Space::Counts) => {
            let (out, meta) = match method {
                AugmentMethod::Rose(cfg) => rose_oversample(matrix, cfg, req)?,
                AugmentMethod::Smote(cfg) => smote_oversample(matrix, cfg, req)?,
                _ => unreachable!("count-space methods are ROSE and SMOTE"),
            };
            Ok((TrainingData::Counts(out), meta))
        }
        _ => Err(Error::invalid(format!(
            "method {} expects {:?} input",
            method.label(),
            method.space()
        ))),
    }
}

fn balance_text(
    corpus: &LabeledCorpus,
    method: &AugmentMethod,
    req: &AugmentRequest,
) -> Result<(LabeledCorpus, AugmentMeta)> {
    let minority = corpus.minority_label();
    match method {
        AugmentMethod::RandomOversampling => {
            let s = synthetic_needed(corpus.len(), corpus.minority_count(), req.target_ratio)?;
            let plan = AugmentationPlan::single_class(corpus.len(), s, minority as usize, 2)?;
            let out = random_oversample(corpus, &plan, req.seed)?;
            Ok((out, AugmentMeta::new(method.label(), minority, s, req.seed)))
        }
        AugmentMethod::Eda(cfg) => eda_augment(corpus, cfg, req),
        AugmentMethod::Iowa(variant) => iowa::iowa_balance(corpus, *variant, req),
        _ => unreachable!("text-space methods are random oversampling, EDA and IOWA"),
    }
}
