use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::DocTermMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            l2: 1e-4,
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective before the first step and after every accepted step.
    pub loss_history: Vec<f64>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Sparse rows plus labels; the last parameter is the intercept.
struct Problem {
    rows: Vec<Vec<(usize, f64)>>,
    y: Vec<f64>,
    dim: usize,
    l2: f64,
}

impl Problem {
    fn margins(&self, w: &[f64]) -> Vec<f64> {
        let b = w[self.dim];
        self.rows
            .iter()
            .map(|r| b + r.iter().map(|&(j, x)| w[j] * x).sum::<f64>())
            .collect()
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let z = self.margins(w);
        let nll = z
            .iter()
            .zip(&self.y)
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / self.y.len() as f64;
        nll + 0.5 * self.l2 * w[..self.dim].iter().map(|b| b * b).sum::<f64>()
    }

    /// Gradient and the per-row Hessian weights `p (1 - p)`.
    fn gradient(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.y.len() as f64;
        let mut g = vec![0.0; self.dim + 1];
        let mut s = Vec::with_capacity(self.rows.len());
        for (row, (z, y)) in self.rows.iter().zip(self.margins(w).into_iter().zip(&self.y)) {
            let p = sigmoid(z);
            let r = (p - y) / n;
            for &(j, x) in row {
                g[j] += r * x;
            }
            g[self.dim] += r;
            s.push(p * (1.0 - p));
        }
        for j in 0..self.dim {
            g[j] += self.l2 * w[j];
        }
        (g, s)
    }

    fn hess_vec(&self, s: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        let mut out = vec![0.0; self.dim + 1];
        for (row, &si) in self.rows.iter().zip(s) {
            let u = v[self.dim] + row.iter().map(|&(j, x)| v[j] * x).sum::<f64>();
            let r = si * u / n;
            for &(j, x) in row {
                out[j] += r * x;
            }
            out[self.dim] += r;
        }
        for j in 0..self.dim {
            out[j] += self.l2 * v[j];
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Truncated conjugate gradients for `H d = -g`.
fn newton_direction(p: &Problem, s: &[f64], g: &[f64]) -> Vec<f64> {
    let dim = g.len();
    let gnorm = norm(g);
    let forcing = gnorm.sqrt().min(0.5) * gnorm;
    let mut d = vec![0.0; dim];
    let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut q = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..dim.clamp(10, 250) {
        if rr.sqrt() <= forcing {
            break;
        }
        let hq = p.hess_vec(s, &q);
        let curv = dot(&q, &hq);
        if curv <= 0.0 {
            break;
        }
        let alpha = rr / curv;
        for i in 0..dim {
            d[i] += alpha * q[i];
            r[i] -= alpha * hq[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..dim {
            q[i] = r[i] + beta * q[i];
        }
    }
    if d.iter().all(|&x| x == 0.0) {
        r = g.iter().map(|x| -x).collect();
        return r;
    }
    d
}

/// Minimises mean negative log-likelihood plus `l2/2 |beta|^2` (intercept
/// unpenalised) with a line-searched Newton-CG method. Stops once the
/// gradient norm is at most `tol`; otherwise the fit is flagged as not
/// converged.
pub fn fit_coefficients(matrix: &DocTermMatrix, cfg: &LogisticConfig) -> Result<LogisticFit> {
    if !(cfg.l2 >= 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::invalid("logistic l2 must be >= 0 and tol > 0"));
    }
    let [c0, c1] = matrix.class_counts();
    if c0 == 0 || c1 == 0 {
        return Err(Error::MissingClass(u8::from(c1 == 0)));
    }
    let dim = matrix.n_cols();
    let problem = Problem {
        rows: (0..matrix.n_rows())
            .map(|i| {
                matrix
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (j, f64::from(c)))
                    .collect()
            })
            .collect(),
        y: matrix.labels().iter().map(|&l| f64::from(l)).collect(),
        dim,
        l2: cfg.l2,
    };
    let mut w = vec![0.0; dim + 1];
    let rate = c1 as f64 / (c0 + c1) as f64;
    w[dim] = (rate / (1.0 - rate)).ln();

    let mut loss = problem.loss(&w);
    let mut history = vec![loss];
    let (mut g, mut s) = problem.gradient(&w);
    let mut iterations = 0;
    while norm(&g) > cfg.tol && iterations < cfg.max_iter {
        let d = newton_direction(&problem, &s, &g);
        let slope = dot(&g, &d);
        let d = if slope < 0.0 { d } else { g.iter().map(|x| -x).collect() };
        let slope = dot(&g, &d);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let trial_loss = problem.loss(&trial);
            if trial_loss <= loss + 1e-4 * step * slope {
                accepted = Some((trial, trial_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((next, next_loss)) = accepted else {
            break;
        };
        iterations += 1;
        w = next;
        loss = next_loss;
        history.push(loss);
        (g, s) = problem.gradient(&w);
    }
    let gradient_norm = norm(&g);
    let intercept = w.pop().expect("intercept slot");
    Ok(LogisticFit {
        coefficients: w,
        intercept,
        converged: gradient_norm <= cfg.tol,
        iterations,
        gradient_norm,
        loss_history: history,
    })
}
