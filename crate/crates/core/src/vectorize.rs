//! Tokenizer, vocabulary and bag-of-words count matrices.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledCorpus;
use crate::error::{Error, Result};

/// Lowercases and splits on every maximal run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Ordered set of distinct tokens with O(1) position lookup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Eq for Vocabulary {}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

/// Keeps tokens whose total count over the corpus is at least `min_count`,
/// in lexicographic order.
pub fn fit_vocabulary(corpus: &LabeledCorpus, min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("cannot fit a vocabulary on an empty corpus".into()));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus.docs() {
        for t in tokenize(&doc.text) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let tokens: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count.max(1))
        .map(|(t, _)| t)
        .collect();
    if tokens.is_empty() {
        return Err(Error::Empty(format!(
            "no token reaches min_count={min_count}"
        )));
    }
    Vocabulary::from_tokens(tokens)
}

/// Dense document-term count matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    counts: Vec<u32>,
    labels: Vec<u8>,
    vocab: Arc<Vocabulary>,
}

impl DocTermMatrix {
    pub fn from_rows(rows: Vec<Vec<u32>>, labels: Vec<u8>, vocab: Arc<Vocabulary>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Empty("document-term matrix needs at least one row".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        let v = vocab.len();
        let mut counts = Vec::with_capacity(rows.len() * v);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != v {
                return Err(Error::invalid(format!(
                    "row {i} has {} columns, vocabulary has {v}",
                    r.len()
                )));
            }
            counts.extend(r);
        }
        Ok(DocTermMatrix {
            counts,
            labels,
            vocab,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocab.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let v = self.n_cols();
        &self.counts[i * v..(i + 1) * v]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks_exact(self.n_cols().max(1))
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.counts[row * self.n_cols() + col]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &l in &self.labels {
            c[l as usize] += 1;
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

    pub fn positive_ratio(&self) -> f64 {
        self.class_counts()[1] as f64 / self.n_rows() as f64
    }

    pub fn push_row(&mut self, row: Vec<u32>, label: u8) -> Result<()> {
        if row.len() != self.n_cols() || label > 1 {
            return Err(Error::invalid("row width or label does not fit the matrix"));
        }
        self.counts.extend(row);
        self.labels.push(label);
        Ok(())
    }

    /// Whether the matrix columns follow `vocab`.
    pub fn same_vocab(&self, vocab: &Vocabulary) -> bool {
        std::ptr::eq(Arc::as_ptr(&self.vocab), vocab) || *self.vocab == *vocab
    }

    /// Non-zero entries as (row, col, count) triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        let v = self.n_cols();
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(move |(i, c)| (i / v, i % v, *c))
    }

    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "row,col,count").map_err(io)?;
        for (r, c, n) in self.triplets() {
            writeln!(w, "{r},{c},{n}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Counts in-vocabulary tokens per document; unknown tokens are dropped.
pub fn transform(corpus: &LabeledCorpus, vocab: &Arc<Vocabulary>) -> Result<DocTermMatrix> {
    let v = vocab.len();
    let mut counts = vec![0u32; corpus.len() * v];
    for (i, doc) in corpus.docs().iter().enumerate() {
        let row = &mut counts[i * v..(i + 1) * v];
        for t in tokenize(&doc.text) {
            if let Some(j) = vocab.lookup(&t) {
                row[j] += 1;
            }
        }
    }
    if corpus.is_empty() {
        return Err(Error::Empty("cannot vectorize an empty corpus".into()));
    }
    Ok(DocTermMatrix {
        counts,
        labels: corpus.labels(),
        vocab: Arc::clone(vocab),
    })
}
