use std::sync::Arc;

use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{synthetic_needed, AugmentMeta, AugmentMethod, AugmentRequest};
use crate::corpus::{Document, LabeledCorpus};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::vectorize::{fit_vocabulary, transform, DocTermMatrix, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IowaVariant {
    Frequency,
    DiffFrequency,
    Idf,
    DiffIdf,
}

impl IowaVariant {
    pub fn label(self) -> &'static str {
        match self {
            IowaVariant::Frequency => "frequency",
            IowaVariant::DiffFrequency => "diff_frequency",
            IowaVariant::Idf => "idf",
            IowaVariant::DiffIdf => "diff_idf",
        }
    }
}

/// Word-weight vector `g` and mean sentence length for one class.
#[derive(Debug, Clone)]
pub struct IowaModel {
    pub variant: IowaVariant,
    pub class: u8,
    /// Mean token count of the class's documents.
    pub lambda: f64,
    /// Poisson rate whose zero-truncated mean is `lambda`; zero when
    /// `lambda <= 1`, in which case every sentence has one token.
    pub poisson_rate: f64,
    g: Vec<f64>,
    vocab: Arc<Vocabulary>,
}

impl IowaModel {
    pub fn weights(&self) -> &[f64] {
        &self.g
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn weight_of(&self, token: &str) -> f64 {
        self.vocab.lookup(token).map_or(0.0, |j| self.g[j])
    }
}

/// Solves `mu / (1 - e^-mu) = mean` by bisection on `(0, mean]`.
pub(crate) fn truncated_poisson_rate(mean: f64) -> f64 {
    if mean <= 1.0 {
        return 0.0;
    }
    let truncated_mean = |mu: f64| mu / (-(-mu).exp_m1());
    let (mut lo, mut hi) = (0.0, mean);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncated_mean(mid) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn clamped_idf(docs: usize, count: u64) -> f64 {
    (docs as f64 / count as f64).ln().max(0.0)
}

pub fn iowa_fit(matrix: &DocTermMatrix, class: u8, variant: IowaVariant) -> Result<IowaModel> {
    if class > 1 {
        return Err(Error::invalid(format!("label {class} is not binary")));
    }
    let v = matrix.n_cols();
    let mut sums = [vec![0u64; v], vec![0u64; v]];
    let counts = matrix.class_counts();
    for (row, &label) in matrix.rows().zip(matrix.labels()) {
        for (s, &c) in sums[label as usize].iter_mut().zip(row) {
            *s += u64::from(c);
        }
    }
    let (n_k, n_c) = (counts[class as usize], counts[1 - class as usize]);
    if n_k == 0 {
        return Err(Error::MissingClass(class));
    }
    let (s_k, s_c) = (&sums[class as usize], &sums[1 - class as usize]);

    let raw: Vec<f64> = match variant {
        IowaVariant::Frequency => s_k.iter().map(|&s| s as f64).collect(),
        IowaVariant::DiffFrequency => (0..v)
            .map(|j| {
                let own = s_k[j] as f64 / n_k as f64;
                let other = if n_c == 0 { 0.0 } else { s_c[j] as f64 / n_c as f64 };
                (own - other).max(0.0)
            })
            .collect(),
        IowaVariant::Idf => s_k
            .iter()
            .map(|&s| if s == 0 { 0.0 } else { clamped_idf(n_k, s) })
            .collect(),
        IowaVariant::DiffIdf => (0..v)
            .map(|j| {
                if s_k[j] == 0 || s_c[j] == 0 {
                    return 0.0;
                }
                (clamped_idf(n_k, s_k[j]) - clamped_idf(n_c, s_c[j])).max(0.0)
            })
            .collect(),
    };
    let delta: f64 = raw.iter().sum();
    if !(delta > 0.0) {
        return Err(Error::DegenerateWeights {
            variant: variant.label().to_owned(),
        });
    }
    let lambda = s_k.iter().sum::<u64>() as f64 / n_k as f64;
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("class {class} documents contain no vocabulary tokens")));
    }
    Ok(IowaModel {
        variant,
        class,
        lambda,
        poisson_rate: truncated_poisson_rate(lambda),
        g: raw.iter().map(|w| w / delta).collect(),
        vocab: matrix.vocab().clone(),
    })
}

/// `count` sentences of the model's class: length `N ~ Poisson(poisson_rate)`
/// redrawn while zero, tokens i.i.d. from `g`, joined by single spaces.
pub fn iowa_generate(model: &IowaModel, count: usize, seed: u64) -> LabeledCorpus {
    let lengths = (model.poisson_rate > 0.0)
        .then(|| Poisson::new(model.poisson_rate).expect("rate is positive"));
    let words = WeightedIndex::new(&model.g).expect("weights are normalised");
    let tokens = model.vocab.tokens();
    let mut rng = rng_from_seed(seed);
    let docs = (0..count)
        .map(|_| {
            let n = match &lengths {
                None => 1,
                Some(p) => loop {
                    let n = p.sample(&mut rng) as usize;
                    if n >= 1 {
                        break n;
                    }
                },
            };
            let text = (0..n)
                .map(|_| tokens[words.sample(&mut rng)].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Document::new(text, model.class)
        })
        .collect();
    LabeledCorpus::new("iowa", docs).expect("labels are binary")
}

/// Fits on the whole training corpus (vocabulary included) and appends the
/// sentences needed to reach the target ratio.
pub(crate) fn iowa_balance(
    corpus: &LabeledCorpus,
    variant: IowaVariant,
    req: &AugmentRequest,
) -> Result<(LabeledCorpus, AugmentMeta)> {
    let minority = corpus.minority_label();
    let s = synthetic_needed(corpus.len(), corpus.minority_count(), req.target_ratio)?;
    let meta = AugmentMeta::new(AugmentMethod::Iowa(variant).label(), minority, s, req.seed);
    if s == 0 {
        return Ok((corpus.clone(), meta));
    }
    let vocab = Arc::new(fit_vocabulary(corpus, 1)?);
    let matrix = transform(corpus, &vocab)?;
    let model = iowa_fit(&matrix, minority, variant)?;
    let mut out = corpus.clone();
    out.extend(iowa_generate(&model, s, req.seed));
    Ok((out, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(pairs: &[(&str, u8)], class: u8, variant: IowaVariant) -> Result<IowaModel> {
        let corpus = LabeledCorpus::from_pairs("c", pairs.iter().copied()).unwrap();
        let vocab = Arc::new(fit_vocabulary(&corpus, 1).unwrap());
        iowa_fit(&transform(&corpus, &vocab).unwrap(), class, variant)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn frequency_fixture() {
        let m = fit(&[("a a b", 1), ("b c", 1), ("z", 0)], 1, IowaVariant::Frequency).unwrap();
        assert!(close(m.weight_of("a"), 0.4));
        assert!(close(m.weight_of("b"), 0.4));
        assert!(close(m.weight_of("c"), 0.2));
        assert_eq!(m.weight_of("z"), 0.0);
        assert!(close(m.lambda, 2.5));
    }

    #[test]
    fn single_document_puts_all_mass_on_its_word() {
        let m = fit(&[("a", 1), ("b", 0)], 1, IowaVariant::Frequency).unwrap();
        assert_eq!(m.weight_of("a"), 1.0);
        let out = iowa_generate(&m, 50, 3);
        assert!(out.docs().iter().all(|d| d.text.split(' ').all(|t| t == "a")));
    }

    #[test]
    fn diff_frequency_zeroes_shared_rate() {
        // "a" appears once per sentence in both classes
        let m = fit(&[("a b b", 1), ("a", 1), ("a c", 0), ("a", 0)], 1, IowaVariant::DiffFrequency).unwrap();
        assert_eq!(m.weight_of("a"), 0.0);
        assert_eq!(m.weight_of("c"), 0.0);
        assert!(close(m.weight_of("b"), 1.0));
        // hand evaluation: s_k = (a 1, b 1), s_c = (a 1, c 0.5)
    }

    #[test]
    fn idf_values() {
        // class 1: 4 docs; counts a=1, b=2, c=4 -> ln4, ln2, 0
        let docs = [("a b", 1), ("b c", 1), ("c", 1), ("c c", 1), ("z", 0)];
        let m = fit(&docs, 1, IowaVariant::Idf).unwrap();
        let (la, lb) = (4f64.ln(), 2f64.ln());
        assert!(close(m.weight_of("a"), la / (la + lb)));
        assert!(close(m.weight_of("b"), lb / (la + lb)));
        assert_eq!(m.weight_of("c"), 0.0);
        assert_eq!(m.weight_of("z"), 0.0);
    }

    #[test]
    fn idf_negative_values_are_clamped() {
        // "a" occurs 3 times in 1 document: ln(1/3) < 0
        let m = fit(&[("a a a b", 1), ("c", 1), ("z", 0)], 1, IowaVariant::Idf).unwrap();
        assert_eq!(m.weight_of("a"), 0.0);
        assert!(close(m.weight_of("b"), 0.5));
    }

    #[test]
    fn diff_idf_values() {
        // class 1 (4 docs): a=1 -> ln4, b=2 -> ln2; class 0 (2 docs): a=2 -> 0, b=1 -> ln2
        let docs = [("a b", 1), ("b", 1), ("q", 1), ("q", 1), ("a b", 0), ("a", 0)];
        let m = fit(&docs, 1, IowaVariant::DiffIdf).unwrap();
        assert!(close(m.weight_of("a"), 1.0));
        assert_eq!(m.weight_of("b"), 0.0);
        // "q" never appears in class 0 and is outside the support
        assert_eq!(m.weight_of("q"), 0.0);
    }

    #[test]
    fn degenerate_weights_name_the_variant() {
        let err = fit(&[("a", 1), ("a", 0)], 1, IowaVariant::DiffFrequency).unwrap_err();
        match err {
            Error::DegenerateWeights { variant } => assert_eq!(variant, "diff_frequency"),
            e => panic!("{e}"),
        }
        assert!(matches!(fit(&[("a", 0), ("b", 0)], 1, IowaVariant::Frequency), Err(Error::MissingClass(1))));
    }

    #[test]
    fn generated_lengths_and_frequencies() {
        let m = fit(&[("a a b", 1), ("b c", 1), ("z", 0)], 1, IowaVariant::Frequency).unwrap();
        let out = iowa_generate(&m, 10_000, 2024);
        let mut total = 0usize;
        let mut freq = [0usize; 3];
        for d in out.docs() {
            assert_eq!(d.label, 1);
            let toks: Vec<&str> = d.text.split(' ').collect();
            assert!(!toks.is_empty());
            total += toks.len();
            for t in toks {
                freq[["a", "b", "c"].iter().position(|w| *w == t).unwrap()] += 1;
            }
        }
        let mean = total as f64 / 10_000.0;
        assert!((mean - 2.5).abs() < 0.1, "{mean}");
        for (f, g) in freq.iter().zip([0.4, 0.4, 0.2]) {
            assert!((*f as f64 / total as f64 - g).abs() < 0.02);
        }
    }

    #[test]
    fn rate_calibration() {
        for mean in [1.2, 2.5, 7.0, 40.0] {
            let mu = truncated_poisson_rate(mean);
            // independent check: truncated mean from the pmf
            let mut p = (-mu).exp();
            let (mut num, mut den) = (0.0, 0.0);
            for n in 1..400 {
                p *= mu / n as f64;
                num += n as f64 * p;
                den += p;
            }
            assert!((num / den - mean).abs() < 1e-9, "{mean}");
        }
        assert_eq!(truncated_poisson_rate(1.0), 0.0);
        let m = fit(&[("a", 1), ("b", 1), ("z", 0)], 1, IowaVariant::Frequency).unwrap();
        let out = iowa_generate(&m, 100, 0);
        assert!(out.docs().iter().all(|d| !d.text.contains(' ')));
    }

    #[test]
    fn balance_appends_minority_sentences() {
        let docs = [("a b", 1), ("b c", 1), ("x y", 0), ("y z", 0), ("x", 0), ("z", 0)];
        let corpus = LabeledCorpus::from_pairs("c", docs).unwrap();
        let req = AugmentRequest::new(0.5, 1).unwrap();
        let (out, meta) = iowa_balance(&corpus, IowaVariant::Frequency, &req).unwrap();
        assert_eq!(meta.synthetic, 2);
        assert_eq!(&out.docs()[..6], corpus.docs());
        for d in &out.docs()[6..] {
            assert_eq!(d.label, 1);
            assert!(d.text.split(' ').all(|t| ["a", "b", "c"].contains(&t)));
        }
    }
}
