//! Labeled text corpora, experiment splits and synthetic oracle corpora.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::vectorize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub label: u8,
}

impl Document {
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        Document {
            text: text.into(),
            label,
        }
    }
}

/// An ordered collection of binary-labeled documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub name: String,
    docs: Vec<Document>,
}

impl LabeledCorpus {
    pub fn new(name: impl Into<String>, docs: Vec<Document>) -> Result<Self> {
        if let Some((i, d)) = docs.iter().enumerate().find(|(_, d)| d.label > 1) {
            return Err(Error::invalid(format!(
                "document {i} has label {} (expected 0 or 1)",
                d.label
            )));
        }
        Ok(LabeledCorpus {
            name: name.into(),
            docs,
        })
    }

    pub fn from_pairs<S: Into<String>>(
        name: impl Into<String>,
        pairs: impl IntoIterator<Item = (S, u8)>,
    ) -> Result<Self> {
        let docs = pairs
            .into_iter()
            .map(|(t, l)| Document::new(t, l))
            .collect();
        Self::new(name, docs)
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.docs.iter().map(|d| d.label).collect()
    }

    /// Number of documents per class, indexed by label.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for d in &self.docs {
            c[d.label as usize] += 1;
        }
        c
    }

    /// The less frequent label; ties resolve to 1.
    pub fn minority_label(&self) -> u8 {
        let [c0, c1] = self.class_counts();
        if c0 < c1 {
            0
        } else {
            1
        }
    }

    pub fn minority_count(&self) -> usize {
        self.class_counts()[self.minority_label() as usize]
    }

    /// Empirical P(Y=1).
    pub fn positive_ratio(&self) -> f64 {
        if self.docs.is_empty() {
            return 0.0;
        }
        self.class_counts()[1] as f64 / self.docs.len() as f64
    }

    /// Fails unless both labels are present.
    pub fn require_both_classes(&self) -> Result<()> {
        let c = self.class_counts();
        for (label, &n) in c.iter().enumerate() {
            if n == 0 {
                return Err(Error::MissingClass(label as u8));
            }
        }
        Ok(())
    }

    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> LabeledCorpus {
        LabeledCorpus {
            name: name.into(),
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
        }
    }

    pub fn push(&mut self, doc: Document) -> Result<()> {
        if doc.label > 1 {
            return Err(Error::invalid(format!("label {} is not binary", doc.label)));
        }
        self.docs.push(doc);
        Ok(())
    }

    pub fn extend(&mut self, other: LabeledCorpus) {
        self.docs.extend(other.docs);
    }
}

/// Reads one document per CSV row. Row numbers in errors are 1-based and
/// count data rows only (the header is not a row).
pub fn load_csv(path: impl AsRef<Path>, text_col: &str, label_col: &str) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, text_col, label_col)
}

pub fn read_csv<R: std::io::Read>(
    reader: R,
    name: &str,
    text_col: &str,
    label_col: &str,
) -> Result<LabeledCorpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))
    };
    let text_idx = position(text_col)?;
    let label_idx = position(label_col)?;

    let mut docs = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let bad = |column: &str, message: String| Error::BadRow {
            row,
            column: column.to_string(),
            message,
        };
        let text = record
            .get(text_idx)
            .ok_or_else(|| bad(text_col, "missing field".into()))?;
        let raw = record
            .get(label_idx)
            .ok_or_else(|| bad(label_col, "missing field".into()))?;
        let label = match raw.trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(bad(
                    label_col,
                    format!("label `{other}` is not 0 or 1"),
                ))
            }
        };
        docs.push(Document::new(text, label));
    }
    if docs.is_empty() {
        return Err(Error::Empty(format!("no data rows in `{name}`")));
    }
    LabeledCorpus::new(name, docs)
}

/// Writes a two-column (`text`, `label`) CSV.
pub fn write_csv(corpus: &LabeledCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(["text", "label"])?;
    for d in corpus.docs() {
        wtr.write_record([d.text.as_str(), if d.label == 1 { "1" } else { "0" }])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default)]
    pub stratify: bool,
}

impl SplitPlan {
    pub fn new(
        train_size: usize,
        validation_size: usize,
        test_size: usize,
        repetitions: usize,
        seed: u64,
    ) -> Self {
        SplitPlan {
            train_size,
            validation_size,
            test_size,
            repetitions,
            seed,
            stratify: false,
        }
    }

    pub fn required(&self) -> usize {
        self.repetitions * self.train_size + self.validation_size + self.test_size
    }

    fn validate(&self) -> Result<()> {
        if self.train_size == 0
            || self.validation_size == 0
            || self.test_size == 0
            || self.repetitions == 0
        {
            return Err(Error::invalid("split sizes and repetitions must be positive"));
        }
        Ok(())
    }
}

/// Source indices of every split part, exportable for audits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSplit {
    pub train_samples: Vec<LabeledCorpus>,
    pub validation: LabeledCorpus,
    pub test: LabeledCorpus,
    pub indices: SplitIndices,
}

impl ExperimentSplit {
    pub fn indices_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.indices)?)
    }
}

/// Draws the test set, the validation set and `repetitions` training samples
/// as disjoint index sets, in that order, from one seeded permutation. The
/// test set therefore only depends on the seed and `test_size`.
pub fn make_splits(corpus: &LabeledCorpus, plan: &SplitPlan) -> Result<ExperimentSplit> {
    plan.validate()?;
    let required = plan.required();
    if required > corpus.len() {
        return Err(Error::InsufficientData {
            required,
            available: corpus.len(),
        });
    }
    let mut rng = rng_from_seed(plan.seed);
    let mut sizes = vec![plan.test_size, plan.validation_size];
    sizes.extend(std::iter::repeat_n(plan.train_size, plan.repetitions));

    let mut parts: Vec<Vec<usize>> = if plan.stratify {
        stratified_parts(corpus, &sizes, &mut rng)?
    } else {
        let mut perm: Vec<usize> = (0..corpus.len()).collect();
        perm.shuffle(&mut rng);
        let mut offset = 0;
        sizes
            .iter()
            .map(|&s| {
                let part = perm[offset..offset + s].to_vec();
                offset += s;
                part
            })
            .collect()
    };

    let test = parts.remove(0);
    let validation = parts.remove(0);
    let train = parts;
    let base = &corpus.name;
    Ok(ExperimentSplit {
        train_samples: train
            .iter()
            .enumerate()
            .map(|(i, idx)| corpus.subset(format!("{base}/train{i}"), idx))
            .collect(),
        validation: corpus.subset(format!("{base}/validation"), &validation),
        test: corpus.subset(format!("{base}/test"), &test),
        indices: SplitIndices {
            train,
            validation,
            test,
        },
    })
}

fn stratified_parts(
    corpus: &LabeledCorpus,
    sizes: &[usize],
    rng: &mut crate::seeding::Rng,
) -> Result<Vec<Vec<usize>>> {
    let mut pools: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, d) in corpus.docs().iter().enumerate() {
        pools[d.label as usize].push(i);
    }
    for pool in pools.iter_mut() {
        pool.shuffle(rng);
    }
    let ratio = corpus.positive_ratio();
    let mut parts = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let n1 = ((s as f64) * ratio).round() as usize;
        let n0 = s - n1.min(s);
        if pools[0].len() < n0 || pools[1].len() < n1 {
            return Err(Error::InsufficientData {
                required: s,
                available: pools[0].len().min(n0) + pools[1].len().min(n1),
            });
        }
        let mut part: Vec<usize> = pools[0].split_off(pools[0].len() - n0);
        part.extend(pools[1].split_off(pools[1].len() - n1));
        part.shuffle(rng);
        parts.push(part);
    }
    Ok(parts)
}

/// Parameters of a two-class multinomial text generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// P(Y=1).
    pub minority_ratio: f64,
    pub vocab_size: usize,
    pub length_mean: f64,
    /// Word distributions for class 0 and class 1.
    pub per_class_word_dists: [Vec<f64>; 2],
    pub seed: u64,
}

impl SyntheticSpec {
    /// Token used for vocabulary position `j`.
    pub fn word(j: usize) -> String {
        format!("w{j}")
    }

    /// A Zipf-shaped background vocabulary with class-1 log-weights tilted by
    /// `signal` on every fifth word (up) and the following word (down).
    pub fn tilted(
        n_docs: usize,
        minority_ratio: f64,
        vocab_size: usize,
        length_mean: f64,
        signal: f64,
        seed: u64,
    ) -> Self {
        let base: Vec<f64> = (0..vocab_size)
            .map(|j| 1.0 / ((j + 1) as f64).powf(0.8))
            .collect();
        let tilt: Vec<f64> = base
            .iter()
            .enumerate()
            .map(|(j, b)| match j % 5 {
                0 => b * signal.exp(),
                1 => b * (-signal).exp(),
                _ => *b,
            })
            .collect();
        SyntheticSpec {
            n_docs,
            minority_ratio,
            vocab_size,
            length_mean,
            per_class_word_dists: [normalize(&base), normalize(&tilt)],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_docs == 0 || self.vocab_size == 0 {
            return Err(Error::invalid("n_docs and vocab_size must be positive"));
        }
        if !(self.minority_ratio > 0.0 && self.minority_ratio <= 0.5) {
            return Err(Error::invalid("minority_ratio must lie in (0, 0.5]"));
        }
        if !(self.length_mean > 0.0) {
            return Err(Error::invalid("length_mean must be positive"));
        }
        for (k, dist) in self.per_class_word_dists.iter().enumerate() {
            if dist.len() != self.vocab_size {
                return Err(Error::invalid(format!(
                    "class {k} word distribution has length {} (vocab_size {})",
                    dist.len(),
                    self.vocab_size
                )));
            }
            if dist.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::invalid(format!(
                    "class {k} word distribution has negative entries"
                )));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "class {k} word distribution sums to {sum}"
                )));
            }
        }
        Ok(())
    }
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

/// Exact P(Y=1|text) under a [`SyntheticSpec`]. Document lengths share one
/// Poisson law across classes and cancel in the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOracle {
    prior: f64,
    log_probs: [Vec<f64>; 2],
    index: HashMap<String, usize>,
}

impl SyntheticOracle {
    pub fn new(spec: &SyntheticSpec) -> Self {
        let log_probs = [
            spec.per_class_word_dists[0].iter().map(|p| p.ln()).collect(),
            spec.per_class_word_dists[1].iter().map(|p| p.ln()).collect(),
        ];
        let index = (0..spec.vocab_size)
            .map(|j| (SyntheticSpec::word(j), j))
            .collect();
        SyntheticOracle {
            prior: spec.minority_ratio,
            log_probs,
            index,
        }
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn prob_positive(&self, text: &str) -> f64 {
        let tokens = tokenize(text);
        self.posterior(tokens.iter().filter_map(|t| self.index.get(t).map(|&j| (j, 1u32))))
    }

    /// Posterior from a count vector whose column `c` holds token `tokens[c]`.
    /// Tokens foreign to the generator are ignored.
    pub fn prob_from_counts(&self, counts: &[u32], tokens: &[String]) -> f64 {
        self.posterior(
            counts
                .iter()
                .zip(tokens)
                .filter(|(c, _)| **c > 0)
                .filter_map(|(c, t)| self.index.get(t).map(|&j| (j, *c))),
        )
    }

    fn posterior(&self, words: impl Iterator<Item = (usize, u32)>) -> f64 {
        let mut ll = [(-self.prior).ln_1p(), self.prior.ln()];
        for (j, c) in words {
            for (k, acc) in ll.iter_mut().enumerate() {
                *acc += f64::from(c) * self.log_probs[k][j];
            }
        }
        match (ll[0] == f64::NEG_INFINITY, ll[1] == f64::NEG_INFINITY) {
            (true, true) => self.prior,
            (true, false) => 1.0,
            (false, true) => 0.0,
            (false, false) => 1.0 / (1.0 + (ll[0] - ll[1]).exp()),
        }
    }
}

/// Samples a corpus from `spec`: labels Bernoulli(minority_ratio), lengths
/// Poisson(length_mean) conditioned on being at least 1, words i.i.d. from
/// the class word distribution.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LabeledCorpus, SyntheticOracle)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let poisson = Poisson::new(spec.length_mean)
        .map_err(|e| Error::invalid(format!("poisson mean: {e}")))?;
    let words: Vec<String> = (0..spec.vocab_size).map(SyntheticSpec::word).collect();
    let samplers = [
        WeightedIndex::new(&spec.per_class_word_dists[0])
            .map_err(|e| Error::invalid(format!("class 0 word distribution: {e}")))?,
        WeightedIndex::new(&spec.per_class_word_dists[1])
            .map_err(|e| Error::invalid(format!("class 1 word distribution: {e}")))?,
    ];
    let mut docs = Vec::with_capacity(spec.n_docs);
    for _ in 0..spec.n_docs {
        let label = u8::from(rng.random_bool(spec.minority_ratio));
        let len = loop {
            let n = poisson.sample(&mut rng) as usize;
            if n >= 1 {
                break n;
            }
        };
        let text = (0..len)
            .map(|_| words[samplers[label as usize].sample(&mut rng)].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        docs.push(Document::new(text, label));
    }
    let corpus = LabeledCorpus::new(format!("synthetic-{}", spec.seed), docs)?;
    Ok((corpus, SyntheticOracle::new(spec)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Write;

    fn corpus_of(n: usize, ratio: f64) -> LabeledCorpus {
        let n1 = (n as f64 * ratio).round() as usize;
        LabeledCorpus::from_pairs(
            "c",
            (0..n).map(|i| (format!("doc {i}"), u8::from(i < n1))),
        )
        .unwrap()
    }

    #[test]
    fn reads_three_rows() {
        let data = "text,label\nhello,0\nworld,1\nagain,0\n";
        let c = read_csv(data.as_bytes(), "t", "text", "label").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.minority_count(), 1);
        assert_eq!(c.labels(), vec![0, 1, 0]);
    }

    #[test]
    fn bad_label_names_row() {
        let data = "text,label\na,0\nb,1\nc,0\nd,1\ne,2\n";
        let err = read_csv(data.as_bytes(), "t", "text", "label").unwrap_err();
        match &err {
            Error::BadRow { row, column, .. } => {
                assert_eq!(*row, 5);
                assert_eq!(column, "label");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("row 5"));
    }

    #[test]
    fn missing_column_and_empty_file() {
        let err = read_csv("text,y\na,0\n".as_bytes(), "t", "text", "label").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "label"));
        let err = read_csv("text,label\n".as_bytes(), "t", "text", "label").unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn quoted_commas_survive_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let original = LabeledCorpus::from_pairs(
            "c",
            [
                ("Good, \"great\" product", 1),
                ("plain", 0),
                ("multi\nline, text", 0),
            ],
        )
        .unwrap();
        write_csv(&original, &path).unwrap();
        let back = load_csv(&path, "text", "label").unwrap();
        assert_eq!(back.docs(), original.docs());

        let mut f = File::create(dir.path().join("q.csv")).unwrap();
        writeln!(f, "label,text\n1,\"a, b, c\"").unwrap();
        let q = load_csv(dir.path().join("q.csv"), "text", "label").unwrap();
        assert_eq!(q.docs()[0].text, "a, b, c");
    }

    #[test]
    fn paper_sized_split() {
        let c = corpus_of(10_000, 0.1);
        let plan = SplitPlan::new(500, 125, 1000, 5, 7);
        let s = make_splits(&c, &plan).unwrap();
        assert_eq!(s.train_samples.len(), 5);
        assert!(s.train_samples.iter().all(|t| t.len() == 500));
        assert_eq!(s.validation.len(), 125);
        assert_eq!(s.test.len(), 1000);

        let mut seen = HashSet::new();
        let all = s
            .indices
            .train
            .iter()
            .flatten()
            .chain(&s.indices.validation)
            .chain(&s.indices.test);
        for &i in all {
            assert!(seen.insert(i), "index {i} repeated");
        }
        assert_eq!(seen.len(), 5 * 500 + 125 + 1000);
    }

    #[test]
    fn oversized_plan_is_rejected() {
        let c = corpus_of(10_000, 0.1);
        let plan = SplitPlan::new(1775, 125, 1000, 5, 0);
        assert_eq!(plan.required(), 10_000);
        assert!(make_splits(&c, &plan).is_ok());
        let plan = SplitPlan::new(1775, 126, 1000, 5, 0);
        match make_splits(&c, &plan).unwrap_err() {
            Error::InsufficientData {
                required,
                available,
            } => {
                assert_eq!(required, 10_001);
                assert_eq!(available, 10_000);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn splits_are_deterministic() {
        let c = corpus_of(2_000, 0.2);
        let plan = SplitPlan::new(100, 50, 200, 3, 99);
        let a = make_splits(&c, &plan).unwrap();
        let b = make_splits(&c, &plan).unwrap();
        assert_eq!(a.indices, b.indices);
        let other = make_splits(&c, &SplitPlan { seed: 100, ..plan }).unwrap();
        assert_ne!(a.indices, other.indices);
        // the test set depends only on seed and test size
        let bigger = make_splits(&c, &SplitPlan { train_size: 300, ..plan }).unwrap();
        assert_eq!(a.indices.test, bigger.indices.test);
    }

    #[test]
    fn stratified_split_matches_ratio() {
        let c = corpus_of(1_000, 0.1);
        let plan = SplitPlan {
            stratify: true,
            ..SplitPlan::new(200, 50, 100, 2, 3)
        };
        let s = make_splits(&c, &plan).unwrap();
        for t in &s.train_samples {
            assert_eq!(t.class_counts()[1], 20);
        }
        assert_eq!(s.test.class_counts()[1], 10);
    }

    #[test]
    fn train_ratio_concentrates() {
        let c = corpus_of(50_000, 0.1);
        for seed in 0..20 {
            let s = make_splits(&c, &SplitPlan::new(2_000, 10, 10, 1, seed)).unwrap();
            let r = s.train_samples[0].positive_ratio();
            assert!((r - 0.1).abs() <= 0.05, "seed {seed}: {r}");
        }
    }

    #[test]
    fn split_indices_export_as_json() {
        let c = corpus_of(100, 0.3);
        let s = make_splits(&c, &SplitPlan::new(10, 10, 10, 2, 1)).unwrap();
        let json = s.indices_json().unwrap();
        let back: SplitIndices = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s.indices);
    }

    #[test]
    fn uninformative_oracle_returns_prior() {
        let mut spec = SyntheticSpec::tilted(200, 0.3, 20, 5.0, 0.0, 1);
        spec.per_class_word_dists[1] = spec.per_class_word_dists[0].clone();
        let (corpus, oracle) = generate_synthetic(&spec).unwrap();
        for d in corpus.docs() {
            assert!((oracle.prob_positive(&d.text) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn separating_word_gives_certainty() {
        let v = 4;
        let mut p0 = vec![1.0 / 3.0; v];
        p0[0] = 0.0;
        let mut p1 = vec![0.0; v];
        p1[0] = 1.0;
        let spec = SyntheticSpec {
            n_docs: 100,
            minority_ratio: 0.2,
            vocab_size: v,
            length_mean: 3.0,
            per_class_word_dists: [p0, p1],
            seed: 5,
        };
        let (corpus, oracle) = generate_synthetic(&spec).unwrap();
        assert_eq!(oracle.prob_positive("w0 w0"), 1.0);
        assert_eq!(oracle.prob_positive("w1 w2"), 0.0);
        for d in corpus.docs() {
            let expected = if d.label == 1 { 1.0 } else { 0.0 };
            assert_eq!(oracle.prob_positive(&d.text), expected);
        }
    }

    #[test]
    fn empirical_minority_fraction() {
        let spec = SyntheticSpec::tilted(10_000, 0.1, 50, 8.0, 0.7, 11);
        let (corpus, _) = generate_synthetic(&spec).unwrap();
        assert!((corpus.positive_ratio() - 0.1).abs() <= 0.01);
        assert!(corpus
            .docs()
            .iter()
            .all(|d| !tokenize(&d.text).is_empty()));
    }

    #[test]
    fn oracle_obeys_total_probability() {
        let spec = SyntheticSpec::tilted(10_000, 0.1, 50, 8.0, 0.7, 12);
        let (corpus, oracle) = generate_synthetic(&spec).unwrap();
        let mean = corpus
            .docs()
            .iter()
            .map(|d| oracle.prob_positive(&d.text))
            .sum::<f64>()
            / corpus.len() as f64;
        assert!((mean - 0.1).abs() <= 0.01, "{mean}");
    }

    #[test]
    fn counts_and_text_agree() {
        let spec = SyntheticSpec::tilted(10, 0.2, 6, 4.0, 1.0, 1);
        let oracle = SyntheticOracle::new(&spec);
        let tokens: Vec<String> = ["w0", "w3", "zz"].iter().map(|s| s.to_string()).collect();
        let a = oracle.prob_from_counts(&[2, 1, 4], &tokens);
        let b = oracle.prob_positive("w0 w3 w0 zz");
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SyntheticSpec::tilted(10, 0.2, 6, 4.0, 1.0, 1);
        spec.per_class_word_dists[0][0] += 1e-9;
        assert!(generate_synthetic(&spec).is_err());
        let spec = SyntheticSpec::tilted(10, 0.6, 6, 4.0, 1.0, 1);
        assert!(generate_synthetic(&spec).is_err());
    }
}
