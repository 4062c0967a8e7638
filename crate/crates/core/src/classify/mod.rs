//! Probabilistic classifiers estimating `P(Y = 1 | x)` from count vectors.

mod forest;
mod logistic;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{fit_trees, ForestConfig, Node, Tree};
pub use logistic::{fit_coefficients, LogisticConfig, LogisticFit};

use crate::error::{Error, Result};
use crate::theory::ThresholdRule;
use crate::vectorize::{DocTermMatrix, Vocabulary};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Forest { trees: Vec<Tree> },
    Logistic(LogisticFit),
}

/// A trained estimator bound to the vocabulary its columns came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    format_version: u32,
    vocab: Vocabulary,
    params: ModelParams,
}

impl FittedModel {
    pub fn new(vocab: Vocabulary, params: ModelParams) -> Result<Self> {
        let v = vocab.len();
        match &params {
            ModelParams::Forest { trees } => {
                if trees.is_empty() {
                    return Err(Error::invalid("a forest needs at least one tree"));
                }
                if trees.iter().filter_map(Tree::n_features_used).any(|f| f as usize >= v) {
                    return Err(Error::VocabularyMismatch);
                }
            }
            ModelParams::Logistic(fit) => {
                if fit.coefficients.len() != v {
                    return Err(Error::VocabularyMismatch);
                }
            }
        }
        Ok(FittedModel {
            format_version: FORMAT_VERSION,
            vocab,
            params,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn kind(&self) -> &'static str {
        match self.params {
            ModelParams::Forest { .. } => "forest",
            ModelParams::Logistic(_) => "logistic",
        }
    }

    /// `false` only for a logistic fit that hit its iteration limit.
    pub fn converged(&self) -> bool {
        match &self.params {
            ModelParams::Forest { .. } => true,
            ModelParams::Logistic(fit) => fit.converged,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: FittedModel = serde_json::from_str(text)?;
        if model.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "model format version {} is not supported (expected {FORMAT_VERSION})",
                model.format_version
            )));
        }
        FittedModel::new(model.vocab, model.params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn fit_forest(matrix: &DocTermMatrix, cfg: &ForestConfig) -> Result<FittedModel> {
    let trees = fit_trees(matrix, cfg)?;
    FittedModel::new((**matrix.vocab()).clone(), ModelParams::Forest { trees })
}

pub fn fit_logistic(matrix: &DocTermMatrix, l2: f64, max_iter: usize, tol: f64) -> Result<FittedModel> {
    let fit = fit_coefficients(matrix, &LogisticConfig { l2, max_iter, tol })?;
    if !fit.converged {
        log::warn!(
            "logistic fit stopped after {} iterations with gradient norm {:.3e}",
            fit.iterations,
            fit.gradient_norm
        );
    }
    FittedModel::new((**matrix.vocab()).clone(), ModelParams::Logistic(fit))
}

/// Forest: mean of per-tree leaf proportions. Logistic: sigmoid of the
/// linear score.
pub fn predict_proba(model: &FittedModel, matrix: &DocTermMatrix) -> Result<Vec<f64>> {
    if !matrix.same_vocab(&model.vocab) {
        return Err(Error::VocabularyMismatch);
    }
    let n = matrix.n_rows();
    let probs = match &model.params {
        ModelParams::Forest { trees } => (0..n)
            .into_par_iter()
            .map(|i| {
                let row = matrix.row(i);
                trees.iter().map(|t| t.predict(row)).sum::<f64>() / trees.len() as f64
            })
            .collect(),
        ModelParams::Logistic(fit) => (0..n)
            .into_par_iter()
            .map(|i| {
                let z = fit.intercept
                    + matrix
                        .row(i)
                        .iter()
                        .zip(&fit.coefficients)
                        .map(|(&c, b)| f64::from(c) * b)
                        .sum::<f64>();
                logistic::sigmoid(z)
            })
            .collect(),
    };
    Ok(probs)
}

pub fn classify_with_rule(probas: &[f64], rule: &ThresholdRule) -> Vec<u8> {
    probas.iter().map(|&p| rule.classify(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::seeding::rng_from_seed;
    use rand::Rng;

    fn vocab(v: usize) -> Arc<Vocabulary> {
        Arc::new(Vocabulary::from_tokens((0..v).map(|j| format!("t{j}")).collect()).unwrap())
    }

    fn matrix(rows: Vec<Vec<u32>>, labels: Vec<u8>) -> DocTermMatrix {
        let v = rows.first().map_or(0, Vec::len);
        DocTermMatrix::from_rows(rows, labels, vocab(v)).unwrap()
    }

    fn separable(n: usize, seed: u64) -> DocTermMatrix {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = u8::from(i % 3 == 0);
            let f0 = if y == 1 { rng.random_range(1..4) } else { 0 };
            rows.push(vec![f0, rng.random_range(0..4)]);
            labels.push(y);
        }
        matrix(rows, labels)
    }

    fn auc(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (si, li) in scores.iter().zip(labels) {
            for (sj, lj) in scores.iter().zip(labels) {
                if *li == 1 && *lj == 0 {
                    den += 1.0;
                    num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn forest_fits_separable_data() {
        let m = separable(120, 1);
        let model = fit_forest(&m, &ForestConfig::default()).unwrap();
        let p = predict_proba(&model, &m).unwrap();
        let labels = classify_with_rule(&p, &ThresholdRule::half());
        assert_eq!(labels, m.labels());
    }

    #[test]
    fn forest_is_deterministic() {
        let m = separable(80, 2);
        let cfg = ForestConfig {
            n_trees: 20,
            seed: 9,
            ..ForestConfig::default()
        };
        let a = predict_proba(&fit_forest(&m, &cfg).unwrap(), &m).unwrap();
        let b = predict_proba(&fit_forest(&m, &cfg).unwrap(), &m).unwrap();
        assert_eq!(a, b);
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<u32>> = (0..80).map(|_| (0..6).map(|_| rng.random_range(0..3)).collect()).collect();
        let labels: Vec<u8> = (0..80).map(|_| u8::from(rng.random_bool(0.4))).collect();
        let noisy = matrix(rows, labels);
        let other = ForestConfig { seed: 10, ..cfg.clone() };
        let a = predict_proba(&fit_forest(&noisy, &cfg).unwrap(), &noisy).unwrap();
        assert_eq!(a, predict_proba(&fit_forest(&noisy, &cfg).unwrap(), &noisy).unwrap());
        assert_ne!(a, predict_proba(&fit_forest(&noisy, &other).unwrap(), &noisy).unwrap());
    }

    #[test]
    fn forest_on_noise_has_chance_auc() {
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = rng_from_seed(100 + seed);
            let mut draw = |n: usize| {
                let rows: Vec<Vec<u32>> =
                    (0..n).map(|_| (0..10).map(|_| rng.random_range(0..3)).collect()).collect();
                let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
                (rows, labels)
            };
            let (tr, trl) = draw(200);
            let (te, tel) = draw(200);
            let v = vocab(10);
            let train = DocTermMatrix::from_rows(tr, trl, v.clone()).unwrap();
            let test = DocTermMatrix::from_rows(te, tel, v).unwrap();
            let cfg = ForestConfig {
                n_trees: 30,
                seed,
                ..ForestConfig::default()
            };
            let p = predict_proba(&fit_forest(&train, &cfg).unwrap(), &test).unwrap();
            let a = auc(&p, test.labels());
            assert!((0.4..=0.6).contains(&a), "seed {seed}: {a}");
            total += a;
        }
        assert!((total / 10.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn forest_mean_of_leaf_proportions() {
        let model = FittedModel::new(
            (*vocab(1)).clone(),
            ModelParams::Forest {
                trees: vec![Tree::leaf(0.2), Tree::leaf(0.6)],
            },
        )
        .unwrap();
        let m = matrix(vec![vec![3]], vec![0]);
        assert!((predict_proba(&model, &m).unwrap()[0] - 0.4).abs() < 1e-15);
        let ones = FittedModel::new(
            (*vocab(1)).clone(),
            ModelParams::Forest {
                trees: vec![Tree::leaf(1.0); 5],
            },
        )
        .unwrap();
        assert_eq!(predict_proba(&ones, &m).unwrap(), [1.0]);
    }

    #[test]
    fn forest_routes_by_threshold() {
        let tree = Tree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 1.5,
                left: 1,
                right: 2,
            },
            Node::Leaf { p1: 0.1 },
            Node::Leaf { p1: 0.9 },
        ])
        .unwrap();
        assert_eq!(tree.predict(&[0, 1]), 0.1);
        assert_eq!(tree.predict(&[0, 2]), 0.9);
        assert!(Tree::from_nodes(vec![Node::Split {
            feature: 0,
            threshold: 0.5,
            left: 1,
            right: 7
        }])
        .is_err());
    }

    #[test]
    fn single_class_input_is_rejected() {
        let m = matrix(vec![vec![1], vec![2]], vec![1, 1]);
        assert!(fit_forest(&m, &ForestConfig::default()).is_err());
        assert!(fit_logistic(&m, 1e-4, 100, 1e-6).is_err());
    }

    #[test]
    fn bad_mtry_is_rejected() {
        let m = separable(30, 0);
        let cfg = ForestConfig {
            mtry: Some(3),
            ..ForestConfig::default()
        };
        assert!(fit_forest(&m, &cfg).is_err());
        assert_eq!(ForestConfig::default().resolved_mtry(10).unwrap(), 4);
        assert_eq!(ForestConfig::default().resolved_mtry(9).unwrap(), 3);
    }

    #[test]
    fn logistic_separable_feature() {
        let rows: Vec<Vec<u32>> = (0..40).map(|i| vec![u32::from(i % 4 == 0)]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 4 == 0)).collect();
        let m = matrix(rows, labels);
        let model = fit_logistic(&m, 1e-4, 200, 1e-8).unwrap();
        let p = predict_proba(&model, &m).unwrap();
        for (pi, &l) in p.iter().zip(m.labels()) {
            if l == 1 {
                assert!(*pi > 0.9, "{pi}");
            } else {
                assert!(*pi < 0.1, "{pi}");
            }
        }
    }

    #[test]
    fn logistic_intercept_only_matches_rate() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
        let m = DocTermMatrix::from_rows(vec![vec![]; 100], labels, vocab(0)).unwrap();
        let model = fit_logistic(&m, 1e-4, 100, 1e-10).unwrap();
        for p in predict_proba(&model, &m).unwrap() {
            assert!((p - 0.3).abs() < 1e-6);
        }
        // all-zero features behave the same
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
        let m = matrix(vec![vec![0, 0]; 100], labels);
        for p in predict_proba(&fit_logistic(&m, 1e-4, 100, 1e-10).unwrap(), &m).unwrap() {
            assert!((p - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn logistic_stops_at_tolerance_with_monotone_loss() {
        let mut rng = rng_from_seed(5);
        let rows: Vec<Vec<u32>> = (0..300).map(|_| (0..6).map(|_| rng.random_range(0..5)).collect()).collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + r[1] + rng.random_range(0..4) > 5))
            .collect();
        let m = matrix(rows, labels);
        let cfg = LogisticConfig {
            l2: 1e-3,
            max_iter: 100,
            tol: 1e-7,
        };
        let fit = fit_coefficients(&m, &cfg).unwrap();
        assert!(fit.converged);
        assert!(fit.gradient_norm <= cfg.tol);
        for w in fit.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        // independent finite-difference gradient of the objective at the optimum
        let objective = |beta: &[f64], b: f64| {
            let mut s = 0.0;
            for (row, &y) in m.rows().zip(m.labels()) {
                let z = b + row.iter().zip(beta).map(|(&c, w)| f64::from(c) * w).sum::<f64>();
                s += (1.0 + z.exp()).ln() - f64::from(y) * z;
            }
            s / 300.0 + 0.5 * 1e-3 * beta.iter().map(|w| w * w).sum::<f64>()
        };
        let h = 1e-5;
        for j in 0..6 {
            let mut up = fit.coefficients.clone();
            let mut dn = fit.coefficients.clone();
            up[j] += h;
            dn[j] -= h;
            let g = (objective(&up, fit.intercept) - objective(&dn, fit.intercept)) / (2.0 * h);
            assert!(g.abs() < 1e-6, "{j}: {g}");
        }
    }

    #[test]
    fn logistic_iteration_limit_flags_non_convergence() {
        let m = separable(60, 3);
        let model = fit_logistic(&m, 0.0, 1, 1e-12).unwrap();
        assert!(!model.converged());
    }

    #[test]
    fn zero_logistic_is_half() {
        let fit = LogisticFit {
            coefficients: vec![0.0; 2],
            intercept: 0.0,
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
            loss_history: vec![],
        };
        let model = FittedModel::new((*vocab(2)).clone(), ModelParams::Logistic(fit)).unwrap();
        let m = matrix(vec![vec![4, 1], vec![0, 0]], vec![0, 1]);
        assert_eq!(predict_proba(&model, &m).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn vocabulary_must_match() {
        let m = separable(30, 4);
        let model = fit_forest(&m, &ForestConfig { n_trees: 3, ..ForestConfig::default() }).unwrap();
        let other = Arc::new(Vocabulary::from_tokens(vec!["x".into(), "y".into()]).unwrap());
        let m2 = DocTermMatrix::from_rows(vec![vec![1, 1]], vec![0], other).unwrap();
        assert!(matches!(predict_proba(&model, &m2), Err(Error::VocabularyMismatch)));
    }

    #[test]
    fn json_round_trip() {
        let m = separable(50, 6);
        let dir = tempfile::tempdir().unwrap();
        for model in [
            fit_forest(&m, &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap(),
            fit_logistic(&m, 1e-2, 100, 1e-6).unwrap(),
        ] {
            let path = dir.path().join(format!("{}.json", model.kind()));
            model.save(&path).unwrap();
            let back = FittedModel::load(&path).unwrap();
            assert_eq!(back, model);
            assert_eq!(predict_proba(&back, &m).unwrap(), predict_proba(&model, &m).unwrap());
        }
        let bad = r#"{"format_version":99,"vocab":["a"],"params":{"kind":"forest","trees":[{"nodes":[{"node":"leaf","p1":0.5}]}]}}"#;
        assert!(FittedModel::from_json(bad).is_err());
    }

    #[test]
    fn rule_application() {
        let r = ThresholdRule::half();
        assert_eq!(classify_with_rule(&[0.4, 0.6, 0.5], &r), [0, 1, 1]);
        let zero = ThresholdRule::new(0.0).unwrap();
        assert_eq!(classify_with_rule(&[0.0, 0.3], &zero), [1, 1]);
    }
}
