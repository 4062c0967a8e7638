use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{synthetic_needed, AugmentMeta, AugmentMethod, AugmentRequest};
use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;
use crate::vectorize::DocTermMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoseConfig {
    pub shrinkage: f64,
}

/// Per-column kernel widths `shrinkage * (4 / ((d + 2) n))^(1/(d + 4)) * sd_j`
/// over the rows labelled `class`, with `d` the number of columns and `sd_j`
/// the sample standard deviation.
pub fn rose_bandwidths(matrix: &DocTermMatrix, class: u8, shrinkage: f64) -> Result<Vec<f64>> {
    if !(shrinkage >= 0.0) {
        return Err(Error::invalid("ROSE shrinkage must be non-negative"));
    }
    let rows: Vec<&[u32]> = matrix
        .rows()
        .zip(matrix.labels())
        .filter(|(_, l)| **l == class)
        .map(|(r, _)| r)
        .collect();
    let d = matrix.n_cols();
    if shrinkage == 0.0 {
        return Ok(vec![0.0; d]);
    }
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "ROSE with shrinkage {shrinkage} needs at least 2 rows of class {class}, found {n}"
        )));
    }
    let scale = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    let widths = (0..d)
        .map(|j| {
            let mean = rows.iter().map(|r| f64::from(r[j])).sum::<f64>() / n as f64;
            let var = rows
                .iter()
                .map(|r| (f64::from(r[j]) - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64;
            shrinkage * scale * var.sqrt()
        })
        .collect();
    Ok(widths)
}

/// Smoothed bootstrap: each synthetic row is a uniformly drawn minority row
/// plus independent Gaussian noise with the [`rose_bandwidths`] widths,
/// clamped at zero and rounded to counts.
pub fn rose_oversample(
    matrix: &DocTermMatrix,
    cfg: &RoseConfig,
    req: &AugmentRequest,
) -> Result<(DocTermMatrix, AugmentMeta)> {
    let minority = matrix.minority_label();
    let seeds: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| matrix.labels()[i] == minority)
        .collect();
    if seeds.is_empty() {
        return Err(Error::MissingClass(minority));
    }
    let widths = rose_bandwidths(matrix, minority, cfg.shrinkage)?;
    let s = synthetic_needed(matrix.n_rows(), seeds.len(), req.target_ratio)?;
    let mut rng = rng_from_seed(req.seed);
    let mut out = matrix.clone();
    for _ in 0..s {
        let seed_row = matrix.row(seeds[rng.random_range(0..seeds.len())]);
        let row = seed_row
            .iter()
            .zip(&widths)
            .map(|(&x, &h)| {
                if h == 0.0 {
                    return x;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                (f64::from(x) + h * z).max(0.0).round() as u32
            })
            .collect();
        out.push_row(row, minority)?;
    }
    let meta = AugmentMeta::new(AugmentMethod::Rose(*cfg).label(), minority, s, req.seed);
    Ok((out, meta))
}
