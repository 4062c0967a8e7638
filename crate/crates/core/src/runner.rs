//! The experiment protocol: for every train size and repetition a base model
//! is fitted on the raw sample and one model per augmentation replicate on
//! the oversampled sample. Test-set metrics are compared under three
//! threshold regimes and the resulting gain matrices are tested for a
//! non-zero mean.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{
    balance_to_ratio, AugmentMethod, AugmentRequest, EdaConfig, EdaVariant, IowaVariant,
    RoseConfig, SmoteConfig, SynonymLexicon, TrainingData, DEFAULT_STOPWORDS,
};
use crate::classify::{fit_forest, fit_logistic, predict_proba, FittedModel, ForestConfig, LogisticConfig};
use crate::corpus::{
    generate_synthetic, load_csv, make_splits, ExperimentSplit, LabeledCorpus, SplitPlan,
    SyntheticOracle, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    optimize_threshold, remap_scores_for_scoring, roc_and_auc, Metric, MetricReport, Objective,
};
use crate::seeding::{derive_seed, hash_label};
use crate::stats::{
    bootstrap_test, functional_boxplot, interpolate_roc, uniform_grid, BootstrapConfig,
    CurveEnsemble, FunctionalBoxplot, GainSample, MeanMode,
};
use crate::theory::{remap_to_augmented, Kind, PriorVector, ProbVector, ThresholdRule};
use crate::vectorize::{fit_vocabulary, transform, DocTermMatrix, Vocabulary};

/// Level at which a gain is reported as significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.01;

pub const ENV_SEED: &str = "AUGEVAL_SEED";
pub const ENV_WORKERS: &str = "AUGEVAL_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSource {
    pub n_docs: usize,
    pub minority_ratio: f64,
    pub vocab_size: usize,
    pub length_mean: f64,
    /// Log-weight tilt of the class-1 word distribution.
    pub signal: f64,
    pub seed: u64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        SyntheticSource {
            n_docs: 12_000,
            minority_ratio: 0.1,
            vocab_size: 500,
            length_mean: 20.0,
            signal: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticSource {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec::tilted(
            self.n_docs,
            self.minority_ratio,
            self.vocab_size,
            self.length_mean,
            self.signal,
            self.seed,
        )
    }
}

fn default_text_col() -> String {
    "text".into()
}

fn default_label_col() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_text_col")]
        text_col: String,
        #[serde(default = "default_label_col")]
        label_col: String,
    },
    Synthetic(SyntheticSource),
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(SyntheticSource::default())
    }
}

impl CorpusSource {
    /// The corpus, plus the exact posterior when it is synthetic.
    pub fn load(&self) -> Result<(LabeledCorpus, Option<SyntheticOracle>)> {
        match self {
            CorpusSource::Csv {
                path,
                text_col,
                label_col,
            } => Ok((load_csv(path, text_col, label_col)?, None)),
            CorpusSource::Synthetic(s) => {
                let (corpus, oracle) = generate_synthetic(&s.spec())?;
                Ok((corpus, Some(oracle)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdaSpec {
    pub alpha: f64,
    pub variant: EdaVariant,
    #[serde(default)]
    pub lexicon: SynonymLexicon,
    /// Tab-separated lexicon file, merged over `lexicon`.
    #[serde(default)]
    pub lexicon_path: Option<PathBuf>,
    #[serde(default)]
    pub stopwords: Option<Vec<String>>,
}

/// One augmentation method as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    RandomOversampling,
    Rose(RoseConfig),
    Smote(SmoteConfig),
    Eda(EdaSpec),
    Iowa { variant: IowaVariant },
}

impl MethodSpec {
    pub fn resolve(&self) -> Result<AugmentMethod> {
        Ok(match self {
            MethodSpec::RandomOversampling => AugmentMethod::RandomOversampling,
            MethodSpec::Rose(c) => AugmentMethod::Rose(*c),
            MethodSpec::Smote(c) => AugmentMethod::Smote(*c),
            MethodSpec::Iowa { variant } => AugmentMethod::Iowa(*variant),
            MethodSpec::Eda(spec) => {
                let lexicon = match &spec.lexicon_path {
                    None => spec.lexicon.clone(),
                    Some(path) => {
                        let mut entries: BTreeMap<String, Vec<String>> = spec.lexicon.clone().into();
                        entries.extend(BTreeMap::from(SynonymLexicon::load(path)?));
                        SynonymLexicon::from_entries(entries)?
                    }
                };
                let mut cfg = EdaConfig::new(spec.alpha, spec.variant, lexicon)?;
                cfg.stopwords = spec
                    .stopwords
                    .clone()
                    .unwrap_or_else(|| DEFAULT_STOPWORDS.iter().map(|s| (*s).to_owned()).collect());
                AugmentMethod::Eda(cfg)
            }
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let MethodSpec::Eda(EdaSpec {
            lexicon_path: Some(p),
            ..
        }) = self
        {
            *p = base.join(&*p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    /// The forest seed is replaced by a per-model derived seed.
    Forest(ForestConfig),
    Logistic(LogisticConfig),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Forest(ForestConfig::default())
    }
}

/// How the base model's cutoff is chosen in the optimised regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseCutoff {
    /// Maximise the objective on the validation set.
    #[default]
    Validation,
    /// The empirical positive rate of the training sample.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Report name of the dataset; defaults to the corpus name.
    pub dataset: Option<String>,
    pub corpus: CorpusSource,
    pub train_sizes: Vec<usize>,
    /// Paired with `train_sizes`.
    pub validation_sizes: Vec<usize>,
    pub test_size: usize,
    pub repetitions: usize,
    pub n_augment_replicates: usize,
    pub target_ratio: f64,
    pub methods: Vec<MethodSpec>,
    pub classifier: ClassifierConfig,
    pub objective: Objective,
    pub bootstrap_replicates: usize,
    pub mean_mode: MeanMode,
    pub master_seed: u64,
    pub stratify: bool,
    /// Use one test set for every train size.
    pub shared_test: bool,
    pub vocab_min_count: usize,
    pub base_cutoff: BaseCutoff,
    pub grid_points: usize,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            corpus: CorpusSource::default(),
            train_sizes: vec![500, 2000],
            validation_sizes: vec![125, 500],
            test_size: 1000,
            repetitions: 5,
            n_augment_replicates: 40,
            target_ratio: 0.5,
            methods: vec![MethodSpec::RandomOversampling],
            classifier: ClassifierConfig::default(),
            objective: Objective::BalancedAccuracy,
            bootstrap_replicates: 1000,
            mean_mode: MeanMode::Free,
            master_seed: 0,
            stratify: false,
            shared_test: true,
            vocab_min_count: 1,
            base_cutoff: BaseCutoff::Validation,
            grid_points: crate::stats::DEFAULT_GRID_POINTS,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let CorpusSource::Csv { path, .. } = &mut cfg.corpus {
            *path = base_dir.join(&*path);
        }
        for m in &mut cfg.methods {
            m.resolve_paths(base_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sizes 200/50/400, 2 repetitions, 8 replicates, 500 bootstrap draws.
    pub fn desk_scale(mut self) -> Self {
        self.train_sizes = vec![200];
        self.validation_sizes = vec![50];
        self.test_size = 400;
        self.repetitions = 2;
        self.n_augment_replicates = 8;
        self.bootstrap_replicates = 500;
        self
    }

    /// Applies `AUGEVAL_SEED` and `AUGEVAL_WORKERS` when set.
    pub fn apply_env(mut self) -> Result<Self> {
        let parse = |name: &str| -> Result<Option<u64>> {
            match std::env::var(name) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Config(format!("{name}={v} is not a non-negative integer"))),
                Err(_) => Ok(None),
            }
        };
        if let Some(seed) = parse(ENV_SEED)? {
            self.master_seed = seed;
        }
        if let Some(w) = parse(ENV_WORKERS)? {
            self.workers = Some(w as usize);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.train_sizes.len() != self.validation_sizes.len() {
            return bad("validation_sizes must pair one-to-one with train_sizes");
        }
        if self.train_sizes.is_empty() {
            return bad("train_sizes is empty");
        }
        if self.train_sizes.iter().chain(&self.validation_sizes).any(|&s| s == 0) || self.test_size == 0 {
            return bad("all sizes must be positive");
        }
        if self.repetitions == 0 || self.n_augment_replicates == 0 {
            return bad("repetitions and n_augment_replicates must be positive");
        }
        if !(self.target_ratio > 0.0 && self.target_ratio < 1.0) {
            return bad("target_ratio must lie in (0, 1)");
        }
        if self.bootstrap_replicates == 0 {
            return bad("bootstrap_replicates must be positive");
        }
        if self.grid_points < 2 {
            return bad("grid_points must be at least 2");
        }
        if self.workers == Some(0) {
            return bad("workers must be positive");
        }
        let labels: Vec<String> = self
            .methods
            .iter()
            .map(|m| m.resolve().map(|a| a.label()))
            .collect::<Result<_>>()?;
        if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
            return bad("methods must have distinct labels");
        }
        Ok(())
    }
}

/// What a learner is fitted on.
pub struct TrainingInput<'a> {
    pub data: &'a TrainingData,
    /// Positive rate of the raw training sample.
    pub sample_prior: f64,
    /// Positive rate after augmentation; `None` for the base model.
    pub augmented_prior: Option<f64>,
    pub seed: u64,
}

/// Scores documents with an estimate of `P(Y = 1 | x)` on the scale of the
/// data the scorer was fitted on.
pub trait Scorer: Send + Sync {
    fn score(&self, corpus: &LabeledCorpus) -> Result<Vec<f64>>;
}

pub trait Learner: Sync {
    fn fit(&self, input: &TrainingInput<'_>) -> Result<Box<dyn Scorer>>;
}

/// Fits the configured classifier on bag-of-words counts. Text inputs get a
/// vocabulary of their own.
pub struct ModelLearner {
    pub classifier: ClassifierConfig,
    pub min_count: usize,
}

struct ModelScorer {
    vocab: Arc<Vocabulary>,
    model: FittedModel,
}

impl Scorer for ModelScorer {
    fn score(&self, corpus: &LabeledCorpus) -> Result<Vec<f64>> {
        predict_proba(&self.model, &transform(corpus, &self.vocab)?)
    }
}

impl Learner for ModelLearner {
    fn fit(&self, input: &TrainingInput<'_>) -> Result<Box<dyn Scorer>> {
        let owned;
        let matrix: &DocTermMatrix = match input.data {
            TrainingData::Text(c) => {
                let vocab = Arc::new(fit_vocabulary(c, self.min_count)?);
                owned = transform(c, &vocab)?;
                &owned
            }
            TrainingData::Counts(m) => m,
        };
        let model = match &self.classifier {
            ClassifierConfig::Forest(cfg) => fit_forest(
                matrix,
                &ForestConfig {
                    seed: input.seed,
                    ..cfg.clone()
                },
            )?,
            ClassifierConfig::Logistic(c) => fit_logistic(matrix, c.l2, c.max_iter, c.tol)?,
        };
        Ok(Box::new(ModelScorer {
            vocab: Arc::clone(matrix.vocab()),
            model,
        }))
    }
}

/// Substitutes the exact synthetic posterior for a fitted model. On
/// augmented input the posterior is moved to the augmented prior, which is
/// what a perfect estimator trained on that sample would return.
pub struct OracleLearner {
    pub oracle: SyntheticOracle,
}

struct OracleScorer {
    oracle: SyntheticOracle,
    shift: Option<(f64, f64)>,
}

impl Scorer for OracleScorer {
    fn score(&self, corpus: &LabeledCorpus) -> Result<Vec<f64>> {
        corpus
            .docs()
            .iter()
            .map(|d| {
                let p = self.oracle.prob_positive(&d.text);
                match self.shift {
                    None => Ok(p),
                    Some((from, to)) => Ok(remap_to_augmented(
                        &ProbVector::binary(p, Kind::Original)?,
                        &PriorVector::binary(from, Kind::Original)?,
                        &PriorVector::binary(to, Kind::Augmented)?,
                    )?
                    .positive()),
                }
            })
            .collect()
    }
}

impl Learner for OracleLearner {
    fn fit(&self, input: &TrainingInput<'_>) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(OracleScorer {
            oracle: self.oracle.clone(),
            shift: input.augmented_prior.map(|a| (input.sample_prior, a)),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Cutoff 0.5 for both models.
    BothDefault,
    /// Cutoff 0.5 for the augmented model, optimised for the base model.
    BaseOptimizedVsAugDefault,
    /// Both cutoffs optimised on the validation set.
    BothOptimized,
}

impl Regime {
    pub const ALL: [Regime; 3] = [
        Regime::BothDefault,
        Regime::BaseOptimizedVsAugDefault,
        Regime::BothOptimized,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Regime::BothDefault => "both_default",
            Regime::BaseOptimizedVsAugDefault => "base_optimized_vs_aug_default",
            Regime::BothOptimized => "both_optimized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    /// Mean of the defined gains.
    pub mean_gain: Option<f64>,
    /// `None` when a gain is undefined or the matrix is smaller than 2x2.
    pub p_value: Option<f64>,
    pub significant: bool,
    /// `gains[i][j]` for repetition `i` and replicate `j`; `None` where the
    /// base value is 0.
    pub gains: Vec<Vec<Option<f64>>>,
    pub augmented: Vec<Vec<f64>>,
    pub base: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: String,
    pub train_size: usize,
    pub regime: Regime,
    pub fitted_models: usize,
    pub metrics: Vec<MetricSummary>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn metric(&self, m: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|s| s.metric == m)
    }

    fn failed(dataset: &str, method: &str, train_size: usize, regime: Regime, error: String) -> Self {
        CellResult {
            dataset: dataset.to_owned(),
            method: method.to_owned(),
            train_size,
            regime,
            fitted_models: 0,
            metrics: Vec::new(),
            error: Some(error),
        }
    }

    fn sort_key(&self) -> (&str, &str, usize, Regime) {
        (&self.dataset, &self.method, self.train_size, self.regime)
    }
}

/// Test-set ROC curves on a common FPR grid for one (method, size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSet {
    pub dataset: String,
    pub method: String,
    pub train_size: usize,
    pub grid: Vec<f64>,
    /// One per (repetition, replicate), repetition-major.
    pub augmented: Vec<Vec<f64>>,
    /// One per repetition.
    pub base: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub cells: Vec<CellResult>,
    pub rocs: Vec<RocSet>,
}

impl RunOutput {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct Scores {
    validation: Vec<f64>,
    test: Vec<f64>,
    sample_prior: f64,
    augmented_prior: Option<f64>,
}

impl Scores {
    /// Test scores on the original-prior scale.
    fn scoring(&self) -> Result<Vec<f64>> {
        match self.augmented_prior {
            None => Ok(self.test.clone()),
            Some(a) => remap_scores_for_scoring(
                &self.test,
                &PriorVector::binary(self.sample_prior, Kind::Original)?,
                &PriorVector::binary(a, Kind::Augmented)?,
            ),
        }
    }
}

enum Job {
    Base { rep: usize },
    Augmented { rep: usize, method: usize, replicate: usize },
}

struct SizeContext<'a> {
    cfg: &'a ExperimentConfig,
    split: &'a ExperimentSplit,
    size: usize,
    methods: &'a [AugmentMethod],
    learner: &'a dyn Learner,
    /// Count view of each training sample for count-space methods.
    counts: Vec<Option<Result<DocTermMatrix>>>,
}

impl SizeContext<'_> {
    fn run_job(&self, job: &Job) -> Result<Scores> {
        let cfg = self.cfg;
        let (rep, data, augmented_prior, seed) = match *job {
            Job::Base { rep } => {
                let seed = derive_seed(&[cfg.master_seed, self.size as u64, rep as u64, hash_label("base")]);
                let data = TrainingData::Text(self.split.train_samples[rep].clone());
                (rep, data, None, seed)
            }
            Job::Augmented {
                rep,
                method,
                replicate,
            } => {
                let m = &self.methods[method];
                let aug_seed = derive_seed(&[
                    cfg.master_seed,
                    self.size as u64,
                    rep as u64,
                    hash_label(&m.label()),
                    replicate as u64,
                ]);
                let input = match m.space() {
                    crate::augment::Space::Text => {
                        TrainingData::Text(self.split.train_samples[rep].clone())
                    }
                    crate::augment::Space::Counts => match &self.counts[rep] {
                        Some(Ok(matrix)) => TrainingData::Counts(matrix.clone()),
                        Some(Err(e)) => return Err(Error::invalid(e.to_string())),
                        None => unreachable!("count views are built for count-space methods"),
                    },
                };
                let req = AugmentRequest::new(cfg.target_ratio, aug_seed)?;
                let (data, meta) = balance_to_ratio(&input, m, &req)?;
                if meta.borderline_fallback {
                    log::warn!("{} rep {rep} replicate {replicate}: no borderline seeds", m.label());
                }
                let prior = match &data {
                    TrainingData::Text(c) => c.positive_ratio(),
                    TrainingData::Counts(mx) => mx.positive_ratio(),
                };
                (rep, data, Some(prior), derive_seed(&[aug_seed, hash_label("model")]))
            }
        };
        let sample_prior = self.split.train_samples[rep].positive_ratio();
        let scorer = self.learner.fit(&TrainingInput {
            data: &data,
            sample_prior,
            augmented_prior,
            seed,
        })?;
        Ok(Scores {
            validation: scorer.score(&self.split.validation)?,
            test: scorer.score(&self.split.test)?,
            sample_prior,
            augmented_prior,
        })
    }
}

/// Runs the protocol with the configured classifier.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (corpus, _) = cfg.corpus.load()?;
    let learner = ModelLearner {
        classifier: cfg.classifier.clone(),
        min_count: cfg.vocab_min_count,
    };
    run_experiment_with(cfg, &corpus, &learner)
}

/// Runs the protocol on `corpus` with an arbitrary learner.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    corpus: &LabeledCorpus,
    learner: &dyn Learner,
) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.methods.is_empty() {
        log::warn!("no augmentation methods configured; nothing to compare");
        return Ok(RunOutput::default());
    }
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| run_all(cfg, corpus, learner)),
        None => run_all(cfg, corpus, learner),
    }
}

fn run_all(cfg: &ExperimentConfig, corpus: &LabeledCorpus, learner: &dyn Learner) -> Result<RunOutput> {
    let dataset = cfg.dataset.clone().unwrap_or_else(|| corpus.name.clone());
    let methods: Vec<AugmentMethod> = cfg.methods.iter().map(MethodSpec::resolve).collect::<Result<_>>()?;
    let grid = uniform_grid(cfg.grid_points)?;
    let mut out = RunOutput::default();

    for (&size, &val) in cfg.train_sizes.iter().zip(&cfg.validation_sizes) {
        let split_seed = if cfg.shared_test {
            derive_seed(&[cfg.master_seed, hash_label("split")])
        } else {
            derive_seed(&[cfg.master_seed, hash_label("split"), size as u64])
        };
        let mut plan = SplitPlan::new(size, val, cfg.test_size, cfg.repetitions, split_seed);
        plan.stratify = cfg.stratify;
        let split = match make_splits(corpus, &plan) {
            Ok(s) => s,
            Err(e) => {
                log::error!("train size {size}: {e}");
                for m in &methods {
                    for regime in Regime::ALL {
                        out.cells
                            .push(CellResult::failed(&dataset, &m.label(), size, regime, e.to_string()));
                    }
                }
                continue;
            }
        };
        let needs_counts = methods.iter().any(|m| m.space() == crate::augment::Space::Counts);
        let ctx = SizeContext {
            cfg,
            split: &split,
            size,
            methods: &methods,
            learner,
            counts: split
                .train_samples
                .iter()
                .map(|s| {
                    needs_counts.then(|| {
                        let vocab = Arc::new(fit_vocabulary(s, cfg.vocab_min_count)?);
                        transform(s, &vocab)
                    })
                })
                .collect(),
        };

        let mut jobs: Vec<Job> = (0..cfg.repetitions).map(|rep| Job::Base { rep }).collect();
        for rep in 0..cfg.repetitions {
            for method in 0..methods.len() {
                for replicate in 0..cfg.n_augment_replicates {
                    jobs.push(Job::Augmented {
                        rep,
                        method,
                        replicate,
                    });
                }
            }
        }
        log::info!("train size {size}: fitting {} models", jobs.len());
        let results: Vec<Result<Scores>> = jobs.par_iter().map(|j| ctx.run_job(j)).collect();
        let mut results = results.into_iter();
        let base: Vec<Result<Scores>> = results.by_ref().take(cfg.repetitions).collect();
        let mut aug: Vec<Vec<Vec<Result<Scores>>>> = (0..cfg.repetitions)
            .map(|_| (0..methods.len()).map(|_| Vec::new()).collect())
            .collect();
        for (job, r) in jobs[cfg.repetitions..].iter().zip(results) {
            if let Job::Augmented { rep, method, .. } = *job {
                aug[rep][method].push(r);
            }
        }

        for (mi, m) in methods.iter().enumerate() {
            let label = m.label();
            let replicates: Vec<&[Result<Scores>]> = aug.iter().map(|per| per[mi].as_slice()).collect();
            match evaluate_method(cfg, &split, size, &label, &base, &replicates, &grid) {
                Ok((cells, roc)) => {
                    for mut c in cells {
                        c.dataset.clone_from(&dataset);
                        out.cells.push(c);
                    }
                    out.rocs.push(RocSet {
                        dataset: dataset.clone(),
                        ..roc
                    });
                }
                Err(e) => {
                    log::error!("{label}, train size {size}: {e}");
                    for regime in Regime::ALL {
                        out.cells
                            .push(CellResult::failed(&dataset, &label, size, regime, e.clone()));
                    }
                }
            }
        }
    }
    out.cells.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out.rocs
        .sort_by(|a, b| (&a.dataset, &a.method, a.train_size).cmp(&(&b.dataset, &b.method, b.train_size)));
    Ok(out)
}

struct Evaluated<'a> {
    scores: &'a Scores,
    scoring: Vec<f64>,
    /// Cutoff maximising the objective on the validation set.
    optimized: ThresholdRule,
}

fn evaluate_method(
    cfg: &ExperimentConfig,
    split: &ExperimentSplit,
    size: usize,
    method: &str,
    base: &[Result<Scores>],
    replicates: &[&[Result<Scores>]],
    grid: &[f64],
) -> std::result::Result<(Vec<CellResult>, RocSet), String> {
    let val_labels = split.validation.labels();
    let test_labels = split.test.labels();
    let prepare = |s: &Scores| -> Result<(Vec<f64>, ThresholdRule)> {
        Ok((s.scoring()?, optimize_threshold(&s.validation, &val_labels, cfg.objective)?))
    };
    let mut base_eval = Vec::with_capacity(base.len());
    for (i, r) in base.iter().enumerate() {
        let s = r.as_ref().map_err(|e| format!("base model, repetition {i}: {e}"))?;
        let (scoring, optimized) = prepare(s).map_err(|e| format!("base model, repetition {i}: {e}"))?;
        let optimized = match cfg.base_cutoff {
            BaseCutoff::Validation => optimized,
            BaseCutoff::Prior => ThresholdRule::new(s.sample_prior).map_err(|e| e.to_string())?,
        };
        base_eval.push(Evaluated {
            scores: s,
            scoring,
            optimized,
        });
    }
    let mut aug_eval: Vec<Vec<Evaluated>> = Vec::with_capacity(replicates.len());
    for (i, row) in replicates.iter().enumerate() {
        let mut out = Vec::with_capacity(row.len());
        for (j, r) in row.iter().enumerate() {
            let ctx = |e: &dyn std::fmt::Display| format!("repetition {i}, replicate {j}: {e}");
            let s = r.as_ref().map_err(|e| ctx(e))?;
            let (scoring, optimized) = prepare(s).map_err(|e| ctx(&e))?;
            out.push(Evaluated {
                scores: s,
                scoring,
                optimized,
            });
        }
        aug_eval.push(out);
    }

    let roc_of = |scores: &[f64]| -> Result<Vec<f64>> {
        Ok(interpolate_roc(&roc_and_auc(scores, &test_labels)?.0, grid))
    };
    let roc = RocSet {
        dataset: String::new(),
        method: method.to_owned(),
        train_size: size,
        grid: grid.to_vec(),
        augmented: aug_eval
            .iter()
            .flatten()
            .map(|e| roc_of(&e.scoring))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?,
        base: base_eval
            .iter()
            .map(|e| roc_of(&e.scoring))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?,
    };

    let fitted_models = base_eval.len() + aug_eval.iter().map(Vec::len).sum::<usize>();
    let half = ThresholdRule::half();
    let mut cells = Vec::with_capacity(3);
    for regime in Regime::ALL {
        let (base_opt, aug_opt) = match regime {
            Regime::BothDefault => (false, false),
            Regime::BaseOptimizedVsAugDefault => (true, false),
            Regime::BothOptimized => (true, true),
        };
        let report = |e: &Evaluated, optimize: bool| {
            let rule = if optimize { e.optimized } else { half };
            MetricReport::compute(&e.scores.test, &rule, &e.scoring, &test_labels)
        };
        let computed: Result<(Vec<MetricReport>, Vec<Vec<MetricReport>>)> = (|| {
            let b = base_eval.iter().map(|e| report(e, base_opt)).collect::<Result<Vec<_>>>()?;
            let a = aug_eval
                .iter()
                .map(|row| row.iter().map(|e| report(e, aug_opt)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok((b, a))
        })();
        let cell = match computed {
            Err(e) => CellResult::failed("", method, size, regime, e.to_string()),
            Ok((b, a)) => CellResult {
                dataset: String::new(),
                method: method.to_owned(),
                train_size: size,
                regime,
                fitted_models,
                metrics: Metric::ALL
                    .iter()
                    .map(|&metric| summarize(cfg, size, method, regime, metric, &b, &a))
                    .collect(),
                error: None,
            },
        };
        cells.push(cell);
    }
    Ok((cells, roc))
}

fn summarize(
    cfg: &ExperimentConfig,
    size: usize,
    method: &str,
    regime: Regime,
    metric: Metric,
    base: &[MetricReport],
    aug: &[Vec<MetricReport>],
) -> MetricSummary {
    let base_values: Vec<f64> = base.iter().map(|r| metric.of(r)).collect();
    let aug_values: Vec<Vec<f64>> = aug
        .iter()
        .map(|row| row.iter().map(|r| metric.of(r)).collect())
        .collect();
    let gains: Vec<Vec<Option<f64>>> = aug_values
        .iter()
        .zip(&base_values)
        .map(|(row, &b)| row.iter().map(|&a| metric.gain(a, b).ok()).collect())
        .collect();
    let defined: Vec<f64> = gains.iter().flatten().flatten().copied().collect();
    let mean_gain = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    let complete: Option<Vec<Vec<f64>>> = gains
        .iter()
        .map(|row| row.iter().copied().collect::<Option<Vec<f64>>>())
        .collect();
    let p_value = match complete.map(GainSample::new) {
        Some(Ok(sample)) => {
            let bcfg = BootstrapConfig {
                replicates: cfg.bootstrap_replicates,
                seed: derive_seed(&[
                    cfg.master_seed,
                    size as u64,
                    hash_label(method),
                    hash_label(regime.label()),
                    hash_label(metric.label()),
                ]),
                mean_mode: cfg.mean_mode,
            };
            match bootstrap_test(&sample, &bcfg) {
                Ok(r) => Some(r.p_value),
                Err(e) => {
                    log::warn!("{method}/{size}/{}/{}: {e}", regime.label(), metric.label());
                    None
                }
            }
        }
        Some(Err(e)) => {
            log::warn!("{method}/{size}/{}/{}: {e}", regime.label(), metric.label());
            None
        }
        None => {
            log::warn!(
                "{method}/{size}/{}/{}: gain undefined for a zero baseline, no test",
                regime.label(),
                metric.label()
            );
            None
        }
    };
    MetricSummary {
        metric,
        mean_gain,
        p_value,
        significant: is_significant(p_value),
        gains,
        augmented: aug_values,
        base: base_values,
    }
}

fn is_significant(p: Option<f64>) -> bool {
    p.is_some_and(|p| p < SIGNIFICANCE_LEVEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per (dataset, method, train size, regime, metric) as CSV,
/// or the cells themselves as JSON.
pub fn emit_report(cells: &[CellResult], path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    if cells.is_empty() {
        return Err(Error::Empty("no results to report".into()));
    }
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    match format {
        ReportFormat::Json => {
            let text = serde_json::to_string_pretty(&sorted)?;
            std::fs::write(path, text).map_err(|e| Error::io(path, e))
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record([
                "dataset",
                "method",
                "train_size",
                "regime",
                "metric",
                "mean_gain",
                "p_value",
                "significant",
                "error",
            ])?;
            for c in sorted {
                for metric in Metric::ALL {
                    let s = c.metric(metric);
                    let p = s.and_then(|s| s.p_value);
                    w.write_record([
                        c.dataset.clone(),
                        c.method.clone(),
                        c.train_size.to_string(),
                        c.regime.label().to_owned(),
                        metric.label().to_owned(),
                        fmt_opt(s.and_then(|s| s.mean_gain)),
                        fmt_opt(p),
                        is_significant(p).to_string(),
                        c.error.clone().unwrap_or_default(),
                    ])?;
                }
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
    }
}

pub fn load_report_json(path: impl AsRef<Path>) -> Result<Vec<CellResult>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Functional boxplot of the augmented-model curves of one (method, size),
/// with the pointwise mean base-model curve alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocEnsembleReport {
    pub dataset: String,
    pub method: String,
    pub train_size: usize,
    pub augmented: FunctionalBoxplot,
    pub base_mean: Vec<f64>,
}

pub fn roc_ensemble(set: &RocSet) -> Result<RocEnsembleReport> {
    if set.base.is_empty() {
        return Err(Error::Empty("no base-model curves".into()));
    }
    let ensemble = CurveEnsemble::new(set.grid.clone(), set.augmented.clone())?;
    let boxplot = functional_boxplot(&ensemble)?;
    let n = set.base.len() as f64;
    let base_mean = (0..set.grid.len())
        .map(|g| set.base.iter().map(|c| c[g]).sum::<f64>() / n)
        .collect();
    Ok(RocEnsembleReport {
        dataset: set.dataset.clone(),
        method: set.method.clone(),
        train_size: set.train_size,
        augmented: boxplot,
        base_mean,
    })
}

/// Writes `roc_<method>_<size>.json` per ROC set into `dir`. Sets that cannot
/// form a boxplot are skipped with a warning.
pub fn emit_roc_ensembles(rocs: &[RocSet], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for set in rocs {
        let report = match roc_ensemble(set) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("skipping ROC ensemble {} / {}: {e}", set.method, set.train_size);
                continue;
            }
        };
        let path = dir.join(format!("roc_{}_{}.json", set.method, set.train_size));
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub const RESULTS_FILE: &str = "results.json";
pub const REPORT_STEM: &str = "report";

/// Writes `results.json`, `report.csv` and the ROC ensembles into `dir`.
pub fn write_run(output: &RunOutput, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let results = dir.join(RESULTS_FILE);
    std::fs::write(&results, output.to_json()?).map_err(|e| Error::io(&results, e))?;
    if output.cells.is_empty() {
        log::warn!("empty run; no report written");
        return Ok(());
    }
    emit_report(&output.cells, dir.join(format!("{REPORT_STEM}.csv")), ReportFormat::Csv)?;
    emit_roc_ensembles(&output.rocs, dir)?;
    Ok(())
}

pub fn read_run(dir: impl AsRef<Path>) -> Result<RunOutput> {
    let path = dir.as_ref().join(RESULTS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    RunOutput::from_json(&text)
}
