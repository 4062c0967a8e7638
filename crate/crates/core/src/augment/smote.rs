use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{synthetic_needed, AugmentMeta, AugmentMethod, AugmentRequest};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::vectorize::DocTermMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Only seed from minority rows misclassified by a k-NN vote.
    pub borderline: bool,
    pub borderline_knn_k: usize,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            borderline: false,
            borderline_knn_k: 5,
        }
    }
}

/// `x + u (neighbor - x)`, rounded to counts.
pub fn smote_interpolate(x: &[u32], neighbor: &[u32], u: f64) -> Vec<u32> {
    x.iter()
        .zip(neighbor)
        .map(|(&a, &b)| {
            let v = f64::from(a) + u * (f64::from(b) - f64::from(a));
            v.max(0.0).round() as u32
        })
        .collect()
}

fn sq_dist(a: &[u32], b: &[u32]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum()
}

/// Indices of the `k` nearest candidates to `target` (excluding `target`
/// itself); distance ties resolve to the lower index.
fn nearest(matrix: &DocTermMatrix, target: usize, candidates: &[usize], k: usize) -> Vec<usize> {
    let x = matrix.row(target);
    let mut d: Vec<(u64, usize)> = candidates
        .iter()
        .filter(|&&c| c != target)
        .map(|&c| (sq_dist(x, matrix.row(c)), c))
        .collect();
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable(k);
        d.truncate(k);
    }
    d.sort_unstable();
    d.into_iter().map(|(_, c)| c).collect()
}

/// SMOTE and Borderline SMOTE on count vectors with Euclidean neighbours.
pub fn smote_oversample(
    matrix: &DocTermMatrix,
    cfg: &SmoteConfig,
    req: &AugmentRequest,
) -> Result<(DocTermMatrix, AugmentMeta)> {
    if cfg.k_neighbors == 0 || cfg.borderline_knn_k == 0 {
        return Err(Error::invalid("SMOTE neighbour counts must be positive"));
    }
    let minority = matrix.minority_label();
    let min_rows: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| matrix.labels()[i] == minority)
        .collect();
    if min_rows.len() < cfg.k_neighbors + 1 {
        return Err(Error::invalid(format!(
            "SMOTE with k = {} needs at least {} minority rows, found {}",
            cfg.k_neighbors,
            cfg.k_neighbors + 1,
            min_rows.len()
        )));
    }
    let mut meta = AugmentMeta::new(
        AugmentMethod::Smote(*cfg).label(),
        minority,
        synthetic_needed(matrix.n_rows(), min_rows.len(), req.target_ratio)?,
        req.seed,
    );

    let mut seeds = min_rows.clone();
    if cfg.borderline {
        let all: Vec<usize> = (0..matrix.n_rows()).collect();
        let danger: Vec<usize> = min_rows
            .iter()
            .copied()
            .filter(|&i| {
                let nn = nearest(matrix, i, &all, cfg.borderline_knn_k);
                let majority_votes = nn.iter().filter(|&&j| matrix.labels()[j] != minority).count();
                2 * majority_votes > nn.len()
            })
            .collect();
        if danger.is_empty() {
            warn!("borderline SMOTE found no misclassified minority rows; using plain SMOTE");
            meta.borderline_fallback = true;
        } else {
            seeds = danger;
        }
    }

    let mut neighbours: Vec<Option<Vec<usize>>> = vec![None; matrix.n_rows()];
    let mut rng = rng_from_seed(req.seed);
    let mut out = matrix.clone();
    for _ in 0..meta.synthetic {
        let x = seeds[rng.random_range(0..seeds.len())];
        let nn = neighbours[x].get_or_insert_with(|| nearest(matrix, x, &min_rows, cfg.k_neighbors));
        let nb = nn[rng.random_range(0..nn.len())];
        let u: f64 = rng.random();
        out.push_row(smote_interpolate(matrix.row(x), matrix.row(nb), u), minority)?;
    }
    Ok((out, meta))
}
