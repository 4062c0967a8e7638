use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{synthetic_needed, AugmentMeta, AugmentMethod, AugmentRequest};
use crate::corpus::{Document, LabeledCorpus};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::vectorize::tokenize;

pub const DEFAULT_STOPWORDS: [&str; 25] = [
    "a", "an", "the", "and", "or", "but", "if", "of", "at", "by", "for", "with", "about", "to",
    "from", "in", "on", "is", "are", "was", "were", "be", "it", "this", "that",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdaVariant {
    #[serde(rename = "SR")]
    SynonymReplacement,
    #[serde(rename = "RI")]
    RandomInsertion,
    #[serde(rename = "RD")]
    RandomDeletion,
}

impl EdaVariant {
    pub fn label(self) -> &'static str {
        match self {
            EdaVariant::SynonymReplacement => "sr",
            EdaVariant::RandomInsertion => "ri",
            EdaVariant::RandomDeletion => "rd",
        }
    }
}

/// Token to synonym list. Keys and synonyms are normalised with the
/// tokenizer's lowercasing; a token is never listed as its own synonym.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl TryFrom<BTreeMap<String, Vec<String>>> for SynonymLexicon {
    type Error = Error;

    fn try_from(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        SynonymLexicon::from_entries(map)
    }
}

impl From<SynonymLexicon> for BTreeMap<String, Vec<String>> {
    fn from(l: SynonymLexicon) -> Self {
        l.entries
    }
}

impl SynonymLexicon {
    pub fn from_entries<K, S>(entries: impl IntoIterator<Item = (K, Vec<S>)>) -> Result<Self>
    where
        K: Into<String>,
        S: Into<String>,
    {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (k, syns) in entries {
            let key = k.into().trim().to_lowercase();
            if key.is_empty() {
                return Err(Error::invalid("empty lexicon token"));
            }
            let list = map.entry(key.clone()).or_default();
            for s in syns {
                let s = s.into().trim().to_lowercase();
                if !s.is_empty() && s != key && !list.contains(&s) {
                    list.push(s);
                }
            }
            if list.is_empty() {
                return Err(Error::invalid(format!("lexicon entry '{key}' has no synonyms")));
            }
        }
        Ok(SynonymLexicon { entries: map })
    }

    /// Reads `token<TAB>syn1,syn2,...` lines; blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, syns) = line.split_once('\t').ok_or_else(|| {
                Error::invalid(format!("lexicon line {}: expected token<TAB>synonyms", i + 1))
            })?;
            entries.push((token.to_owned(), syns.split(',').map(str::to_owned).collect()));
        }
        Self::from_entries(entries)
    }

    pub fn synonyms(&self, token: &str) -> Option<&[String]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaConfig {
    pub alpha: f64,
    pub variant: EdaVariant,
    #[serde(default)]
    pub lexicon: SynonymLexicon,
    #[serde(default = "default_stopwords")]
    pub stopwords: Vec<String>,
}

fn default_stopwords() -> Vec<String> {
    DEFAULT_STOPWORDS.iter().map(|s| (*s).to_owned()).collect()
}

impl EdaConfig {
    pub fn new(alpha: f64, variant: EdaVariant, lexicon: SynonymLexicon) -> Result<Self> {
        let cfg = EdaConfig {
            alpha,
            variant,
            lexicon,
            stopwords: default_stopwords(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("EDA alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }

    fn operations(&self, len: usize) -> usize {
        ((self.alpha * len as f64).ceil() as usize).max(1)
    }
}

/// One EDA edit of `text`. Returns `None` when SR or RI find no token with a
/// lexicon entry, i.e. the sentence cannot be edited.
pub fn eda_transform<R: Rng + ?Sized>(text: &str, cfg: &EdaConfig, rng: &mut R) -> Option<String> {
    let mut tokens = tokenize(text);
    if tokens.is_empty() {
        return None;
    }
    let n = cfg.operations(tokens.len());
    match cfg.variant {
        EdaVariant::SynonymReplacement => {
            let stop: HashSet<&str> = cfg.stopwords.iter().map(String::as_str).collect();
            let eligible: Vec<usize> = (0..tokens.len())
                .filter(|&i| !stop.contains(tokens[i].as_str()) && cfg.lexicon.synonyms(&tokens[i]).is_some())
                .collect();
            if eligible.is_empty() {
                return None;
            }
            for pick in sample(rng, eligible.len(), n.min(eligible.len())) {
                let pos = eligible[pick];
                let syns = cfg.lexicon.synonyms(&tokens[pos]).expect("eligible");
                tokens[pos] = syns[rng.random_range(0..syns.len())].clone();
            }
        }
        EdaVariant::RandomInsertion => {
            for _ in 0..n {
                let covered: Vec<usize> = (0..tokens.len())
                    .filter(|&i| cfg.lexicon.synonyms(&tokens[i]).is_some())
                    .collect();
                if covered.is_empty() {
                    return None;
                }
                let src = covered[rng.random_range(0..covered.len())];
                let syns = cfg.lexicon.synonyms(&tokens[src]).expect("covered");
                let word = syns[rng.random_range(0..syns.len())].clone();
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(at, word);
            }
        }
        EdaVariant::RandomDeletion => {
            let keep: Vec<bool> = tokens.iter().map(|_| !rng.random_bool(cfg.alpha)).collect();
            if keep.iter().all(|&k| k) {
                return Some(text.to_owned());
            }
            if keep.iter().all(|&k| !k) {
                let survivor = tokens.swap_remove(rng.random_range(0..tokens.len()));
                return Some(survivor);
            }
            tokens = tokens
                .into_iter()
                .zip(keep)
                .filter_map(|(t, k)| k.then_some(t))
                .collect();
        }
    }
    Some(tokens.join(" "))
}

/// Appends EDA edits of uniformly drawn minority documents until the target
/// ratio is reached.
pub fn eda_augment(
    corpus: &LabeledCorpus,
    cfg: &EdaConfig,
    req: &AugmentRequest,
) -> Result<(LabeledCorpus, AugmentMeta)> {
    cfg.validate()?;
    let minority = corpus.minority_label();
    let pool: Vec<&Document> = corpus.docs().iter().filter(|d| d.label == minority).collect();
    if pool.is_empty() {
        return Err(Error::MissingClass(minority));
    }
    let s = synthetic_needed(corpus.len(), pool.len(), req.target_ratio)?;
    let mut meta = AugmentMeta::new(AugmentMethod::Eda(cfg.clone()).label(), minority, s, req.seed);
    let mut rng = rng_from_seed(req.seed);
    let mut out = corpus.clone();
    for _ in 0..s {
        let doc = pool[rng.random_range(0..pool.len())];
        let text = match eda_transform(&doc.text, cfg, &mut rng) {
            Some(t) => t,
            None => {
                meta.unchanged += 1;
                doc.text.clone()
            }
        };
        out.push(Document::new(text, minority))?;
    }
    Ok((out, meta))
}
