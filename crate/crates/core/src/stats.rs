//! Parametric bootstrap test for mean percentage gains and functional
//! boxplots of ROC ensembles.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RocCurve;
use crate::seeding::{derive_seed, rng_from_seed};

/// `I x J` gains: row `i` is a train repetition, column `j` an augmentation
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSample {
    rows: Vec<Vec<f64>>,
}

impl GainSample {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::invalid("a gain sample needs at least 2 repetitions"));
        }
        let j = rows[0].len();
        if j < 2 || rows.iter().any(|r| r.len() != j) {
            return Err(Error::invalid("gain rows must share a length of at least 2"));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("gains must be finite"));
        }
        Ok(GainSample { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.rows[0].len())
    }

    pub fn mean(&self) -> f64 {
        let (i, j) = self.shape();
        self.rows.iter().flatten().sum::<f64>() / (i * j) as f64
    }
}

/// Where the mean is held while the variances are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Joint maximum likelihood with the mean free.
    #[default]
    Free,
    /// Variances maximise the likelihood with the mean fixed at 0.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub mu: f64,
    pub sigma2: f64,
    pub sigma2_r: f64,
}

/// Maximum likelihood for `X_ij = M_i + e_ij`, `M_i ~ N(mu, sigma2)`,
/// `e_ij ~ N(0, sigma2_r)`, balanced design. Interior solution:
/// `sigma2_r = SSE / (I (J - 1))`, `sigma2 = mean_i (xbar_i - mu)^2 - sigma2_r / J`.
/// When that `sigma2` is negative the maximiser sits on the boundary
/// `sigma2 = 0`, `sigma2_r = sum (x_ij - mu)^2 / (I J)`.
pub fn fit_variance_components(sample: &GainSample, mode: MeanMode) -> VarianceComponents {
    let (i, j) = sample.shape();
    let (fi, fj) = (i as f64, j as f64);
    let mu = match mode {
        MeanMode::Free => sample.mean(),
        MeanMode::Zero => 0.0,
    };
    let row_means: Vec<f64> = sample.rows.iter().map(|r| r.iter().sum::<f64>() / fj).collect();
    let sse: f64 = sample
        .rows
        .iter()
        .zip(&row_means)
        .map(|(r, m)| r.iter().map(|x| (x - m).powi(2)).sum::<f64>())
        .sum();
    let sigma2_r = sse / (fi * (fj - 1.0));
    let between = row_means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / fi;
    let sigma2 = between - sigma2_r / fj;
    if sigma2 >= 0.0 {
        return VarianceComponents { mu, sigma2, sigma2_r };
    }
    let sst: f64 = sample.rows.iter().flatten().map(|x| (x - mu).powi(2)).sum();
    VarianceComponents {
        mu,
        sigma2: 0.0,
        sigma2_r: sst / (fi * fj),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub mean_mode: MeanMode,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            seed: 0,
            mean_mode: MeanMode::Free,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub t: f64,
    pub sigma2_hat: f64,
    pub sigma2_r_hat: f64,
    pub p_value: f64,
    pub replicates: usize,
    /// Both variances are zero, so the p-value is 0 or 1 without simulation.
    pub degenerate: bool,
}

impl BootstrapResult {
    pub fn significant(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Two-sided test of `mu = 0` with statistic `T` = grand mean. Null
/// datasets are drawn at `(0, sigma2_hat, sigma2_r_hat)` and
/// `p = #{b : |T_b| >= |T|} / B`. Replicate `b` uses the seed
/// `derive_seed([cfg.seed, b])`.
pub fn bootstrap_test(sample: &GainSample, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    if cfg.replicates == 0 {
        return Err(Error::invalid("bootstrap needs at least one replicate"));
    }
    let t = sample.mean();
    let vc = fit_variance_components(sample, cfg.mean_mode);
    let mut result = BootstrapResult {
        t,
        sigma2_hat: vc.sigma2,
        sigma2_r_hat: vc.sigma2_r,
        p_value: 1.0,
        replicates: cfg.replicates,
        degenerate: false,
    };
    if vc.sigma2 == 0.0 && vc.sigma2_r == 0.0 {
        result.degenerate = true;
        result.p_value = if t == 0.0 { 1.0 } else { 0.0 };
        return Ok(result);
    }
    let (i, j) = sample.shape();
    let between = Normal::new(0.0, vc.sigma2.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let within = Normal::new(0.0, vc.sigma2_r.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let exceed = (0..cfg.replicates)
        .into_par_iter()
        .filter(|&b| {
            let mut rng = rng_from_seed(derive_seed(&[cfg.seed, b as u64]));
            let mut total = 0.0;
            for _ in 0..i {
                let m = between.sample(&mut rng);
                for _ in 0..j {
                    total += m + within.sample(&mut rng);
                }
            }
            (total / (i * j) as f64).abs() >= t.abs()
        })
        .count();
    result.p_value = exceed as f64 / cfg.replicates as f64;
    Ok(result)
}

/// `n` equally spaced points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("a grid needs at least 2 points"));
    }
    Ok((0..n).map(|k| k as f64 / (n - 1) as f64).collect())
}

pub const DEFAULT_GRID_POINTS: usize = 101;

/// TPR at each grid FPR: linear between knots, and the largest TPR where
/// the curve has a vertical segment.
pub fn interpolate_roc(curve: &RocCurve, grid: &[f64]) -> Vec<f64> {
    let pts = curve.points();
    grid.iter()
        .map(|&x| {
            let x = x.clamp(0.0, 1.0);
            let idx = pts.partition_point(|p| p.0 <= x);
            let (x0, y0) = pts[idx - 1];
            if x0 == x || idx == pts.len() {
                return y0;
            }
            let (x1, y1) = pts[idx];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        })
        .collect()
}

/// Trapezoidal area under a curve sampled on `grid`.
pub fn grid_area(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEnsemble {
    grid: Vec<f64>,
    curves: Vec<Vec<f64>>,
}

impl CurveEnsemble {
    pub fn new(grid: Vec<f64>, curves: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("grid must have at least 2 increasing points"));
        }
        if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
            return Err(Error::invalid("grid must lie in [0, 1]"));
        }
        if curves.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::invalid("every curve must be evaluated on the whole grid"));
        }
        Ok(CurveEnsemble { grid, curves })
    }

    pub fn from_rocs(grid: Vec<f64>, rocs: &[RocCurve]) -> Result<Self> {
        let curves = rocs.iter().map(|r| interpolate_roc(r, &grid)).collect();
        Self::new(grid, curves)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBoxplot {
    pub grid: Vec<f64>,
    pub depths: Vec<f64>,
    pub median_index: usize,
    pub median: Vec<f64>,
    pub band_lower: Vec<f64>,
    pub band_upper: Vec<f64>,
    pub fence_lower: Vec<f64>,
    pub fence_upper: Vec<f64>,
    pub outliers: Vec<usize>,
}

impl FunctionalBoxplot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn pairs(k: u64) -> u64 {
    k * k.saturating_sub(1) / 2
}

/// Modified band depth with bands from pairs of curves. Per grid point a
/// value lies outside a pair's band only when both curves are strictly on
/// the same side of it, so the inside count is
/// `C(n,2) - C(below,2) - C(above,2)`.
pub fn modified_band_depth(ensemble: &CurveEnsemble) -> Vec<f64> {
    let n = ensemble.curves.len();
    let g = ensemble.grid.len();
    let mut inside = vec![0u64; n];
    let mut column: Vec<f64> = Vec::with_capacity(n);
    for k in 0..g {
        column.clear();
        column.extend(ensemble.curves.iter().map(|c| c[k]));
        column.sort_by(f64::total_cmp);
        for (c, total) in ensemble.curves.iter().zip(inside.iter_mut()) {
            let v = c[k];
            let below = column.partition_point(|&x| x < v) as u64;
            let above = (n - column.partition_point(|&x| x <= v)) as u64;
            *total += pairs(n as u64) - pairs(below) - pairs(above);
        }
    }
    let denom = (pairs(n as u64) * g as u64) as f64;
    inside.into_iter().map(|c| c as f64 / denom).collect()
}

/// Median = deepest curve; central band = envelope of the deepest
/// `ceil(n/2)` curves; fences = band widened by 1.5 band heights and
/// clipped to `[0, 1]`; outliers cross a fence somewhere.
pub fn functional_boxplot(ensemble: &CurveEnsemble) -> Result<FunctionalBoxplot> {
    let n = ensemble.curves.len();
    if n < 3 {
        return Err(Error::invalid(format!("functional boxplot needs at least 3 curves, got {n}")));
    }
    let depths = modified_band_depth(ensemble);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| depths[b].total_cmp(&depths[a]).then(a.cmp(&b)));
    let median_index = order[0];
    let central = &order[..n.div_ceil(2)];
    let g = ensemble.grid.len();
    let mut band_lower = vec![f64::INFINITY; g];
    let mut band_upper = vec![f64::NEG_INFINITY; g];
    for &c in central {
        for k in 0..g {
            band_lower[k] = band_lower[k].min(ensemble.curves[c][k]);
            band_upper[k] = band_upper[k].max(ensemble.curves[c][k]);
        }
    }
    let (fence_lower, fence_upper): (Vec<f64>, Vec<f64>) = band_lower
        .iter()
        .zip(&band_upper)
        .map(|(&lo, &hi)| {
            let h = hi - lo;
            ((lo - 1.5 * h).clamp(0.0, 1.0), (hi + 1.5 * h).clamp(0.0, 1.0))
        })
        .unzip();
    let outliers = (0..n)
        .filter(|&c| {
            ensemble.curves[c]
                .iter()
                .enumerate()
                .any(|(k, &v)| v < fence_lower[k] || v > fence_upper[k])
        })
        .collect();
    Ok(FunctionalBoxplot {
        grid: ensemble.grid.clone(),
        depths,
        median_index,
        median: ensemble.curves[median_index].clone(),
        band_lower,
        band_upper,
        fence_lower,
        fence_upper,
        outliers,
    })
}
