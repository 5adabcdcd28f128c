//! PCA and exact t-SNE.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::{symmetric_eigen_top, Matrix};
use crate::rng::{normal, seeded};

/// Fitted principal components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x D`, one unit direction per row.
    pub components: Matrix,
    /// Variances along the components (`/(N - 1)`), descending.
    pub eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                got: x.cols(),
            });
        }
        let k = self.components.rows();
        let mut out = Matrix::zeros(x.rows(), k);
        for (r, row) in x.iter_rows().enumerate() {
            for c in 0..k {
                out.row_mut(r)[c] = self
                    .components
                    .row(c)
                    .iter()
                    .zip(row)
                    .zip(&self.mean)
                    .map(|((u, v), m)| u * (v - m))
                    .sum();
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, y: &Matrix) -> Matrix {
        let d = self.mean.len();
        let mut out = Matrix::zeros(y.rows(), d);
        for (r, row) in y.iter_rows().enumerate() {
            let o = out.row_mut(r);
            o.copy_from_slice(&self.mean);
            for (c, &w) in row.iter().enumerate() {
                for (oi, u) in o.iter_mut().zip(self.components.row(c)) {
                    *oi += w * u;
                }
            }
        }
        out
    }
}

/// Top-`k` principal directions of the rows of `x`. Uses the `D x D`
/// covariance when `D <= N` and the `N x N` Gram matrix otherwise.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(param("PCA needs at least 2 rows"));
    }
    if k == 0 || k > n.min(d) {
        return Err(param(format!("k must lie in 1..={}, got {k}", n.min(d))));
    }
    let mean = x.column_means();
    let mut c = x.clone();
    for r in 0..n {
        for (v, m) in c.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let denom = (n - 1) as f64;
    let mut components = Matrix::zeros(k, d);
    let mut eigenvalues = Vec::with_capacity(k);
    if d <= n {
        let cov = c.transpose().matmul(&c)?;
        let (vals, vecs) = symmetric_eigen_top(&cov, k)?;
        for (i, (v, u)) in vals.into_iter().zip(vecs).enumerate() {
            eigenvalues.push((v / denom).max(0.0));
            components.row_mut(i).copy_from_slice(&u);
        }
    } else {
        let gram = c.matmul(&c.transpose())?;
        let (vals, vecs) = symmetric_eigen_top(&gram, k)?;
        let cutoff = 1e-12 * vals.first().copied().unwrap_or(0.0).max(0.0);
        for (i, (v, w)) in vals.into_iter().zip(vecs).enumerate() {
            eigenvalues.push((v / denom).max(0.0));
            // u = C^T w / sqrt(v); null directions stay zero.
            if v > cutoff && v > 0.0 {
                let s = 1.0 / sqrt(v);
                let row = components.row_mut(i);
                for (r, &wr) in w.iter().enumerate() {
                    for (o, cv) in row.iter_mut().zip(c.row(r)) {
                        *o += wr * cv * s;
                    }
                }
            }
        }
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// Projection of `x` onto its own top-`k` principal directions.
pub fn pca_fit_transform(x: &Matrix, k: usize) -> Result<Matrix> {
    pca_fit(x, k)?.transform(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub out_dims: usize,
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    /// Iteration at which the final momentum takes over.
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            out_dims: 2,
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 100.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch: 250,
            exaggeration: 4.0,
            exaggeration_iters: 100,
            seed: 0,
        }
    }
}

fn sq_dists(x: &Matrix) -> Vec<f64> {
    let n = x.rows();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional distribution `p_{j|i}` for one row of squared distances at
/// precision `beta`, and its Shannon entropy in nats.
fn conditional_row(d: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // Shifting by the smallest off-diagonal distance keeps exp() in range.
    let dmin = d
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if j == i {
            0.0
        } else {
            exp(-beta * (d[j] - dmin))
        };
        sum += *o;
    }
    let mut h = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o /= sum;
        if j != i && *o > 0.0 {
            h -= *o * log(*o);
        }
    }
    h
}

/// Result of the per-point bandwidth search.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinities {
    /// Symmetric joint probabilities, row-major `N x N`.
    pub p: Vec<f64>,
    /// Precision `1 / (2 sigma_i^2)` found for each point.
    pub beta: Vec<f64>,
    /// Perplexity `exp(H_i)` achieved by each conditional distribution.
    pub perplexity: Vec<f64>,
}

/// Joint affinities `p_ij = (p_{j|i} + p_{i|j}) / 2N`, with each `sigma_i`
/// found by bisection on the precision so that the conditional perplexity
/// matches `target` within `1e-4`.
pub fn joint_probabilities(x: &Matrix, target: f64) -> Result<Affinities> {
    let n = x.rows();
    if !(target > 0.0) || target >= n as f64 {
        return Err(param(format!("perplexity {target} must lie in (0, {n})")));
    }
    let d = sq_dists(x);
    let log_target = log(target);
    let mut cond = vec![0.0; n * n];
    let mut betas = vec![1.0; n];
    let mut perp = vec![0.0; n];
    for i in 0..n {
        let row = &d[i * n..(i + 1) * n];
        let out = &mut cond[i * n..(i + 1) * n];
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = conditional_row(row, i, beta, out);
        for _ in 0..200 {
            if libm::fabs(exp(h) - target) <= 1e-5 {
                break;
            }
            // Entropy decreases as the precision grows.
            if h > log_target {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = conditional_row(row, i, beta, out);
        }
        betas[i] = beta;
        perp[i] = exp(h);
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
            }
        }
    }
    Ok(Affinities {
        p,
        beta: betas,
        perplexity: perp,
    })
}

/// Student-t kernel `(1 + |y_i - y_j|^2)^-1` (zero diagonal) and its sum.
fn student(y: &Matrix) -> (Vec<f64>, f64) {
    let n = y.rows();
    let d = sq_dists(y);
    let mut w = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = 1.0 / (1.0 + d[i * n + j]);
                w[i * n + j] = v;
                z += v;
            }
        }
    }
    (w, z)
}

/// `KL(P || Q)` for the embedding `y`.
pub fn kl_divergence(p: &[f64], y: &Matrix) -> f64 {
    let n = y.rows();
    let (w, z) = student(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                let q = (w[i * n + j] / z).max(f64::MIN_POSITIVE);
                kl += pij * log(pij / q);
            }
        }
    }
    kl
}

/// Gradient `4 Σ_j (p_ij - q_ij)(y_i - y_j)(1 + |y_i - y_j|^2)^-1`.
pub fn kl_gradient(p: &[f64], y: &Matrix) -> Matrix {
    let (n, dims) = (y.rows(), y.cols());
    let (w, z) = student(y);
    let mut g = Matrix::zeros(n, dims);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let wij = w[i * n + j];
            let m = 4.0 * (p[i * n + j] - wij / z) * wij;
            for c in 0..dims {
                let diff = y[(i, c)] - y[(j, c)];
                g.row_mut(i)[c] += m * diff;
            }
        }
    }
    g
}

/// Full run with the KL value recorded after every iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TsneRun {
    pub embedding: Matrix,
    /// KL of the initial embedding.
    pub initial_kl: f64,
    /// KL after each iteration against the true (unexaggerated) P.
    pub kl_history: Vec<f64>,
}

/// Gradient descent with momentum and per-coordinate gains on `KL(P || Q)`.
pub fn tsne_run(x: &Matrix, params: &TsneParams) -> Result<TsneRun> {
    let n = x.rows();
    if n < 4 {
        return Err(param("t-SNE needs at least 4 points"));
    }
    if params.out_dims == 0 {
        return Err(param("t-SNE output dimension must be positive"));
    }
    if params.perplexity >= n as f64 {
        return Err(param(format!(
            "perplexity {} must be below the number of points {n}",
            params.perplexity
        )));
    }
    let aff = joint_probabilities(x, params.perplexity)?;
    let dims = params.out_dims;
    let mut rng = seeded(params.seed);
    let mut y = Matrix::zeros(n, dims);
    for r in 0..n {
        for c in 0..dims {
            y.row_mut(r)[c] = 1e-4 * normal(&mut rng);
        }
    }
    center(&mut y);
    let initial_kl = kl_divergence(&aff.p, &y);
    let exaggerated: Vec<f64> = aff.p.iter().map(|v| v * params.exaggeration).collect();
    let mut update = Matrix::zeros(n, dims);
    let mut gains = vec![1.0f64; n * dims];
    let mut kl_history = Vec::with_capacity(params.iterations);
    for it in 0..params.iterations {
        let p = if it < params.exaggeration_iters {
            &exaggerated
        } else {
            &aff.p
        };
        let g = kl_gradient(p, &y);
        let mom = if it < params.momentum_switch {
            params.momentum_initial
        } else {
            params.momentum_final
        };
        for r in 0..n {
            for c in 0..dims {
                let gi = &mut gains[r * dims + c];
                // Delta-bar-delta step size adaptation.
                *gi = if (g[(r, c)] > 0.0) != (update[(r, c)] > 0.0) {
                    *gi + 0.2
                } else {
                    (*gi * 0.8).max(0.01)
                };
                let u = mom * update[(r, c)] - params.learning_rate * *gi * g[(r, c)];
                update.row_mut(r)[c] = u;
                y.row_mut(r)[c] += u;
            }
        }
        center(&mut y);
        kl_history.push(kl_divergence(&aff.p, &y));
    }
    Ok(TsneRun {
        embedding: y,
        initial_kl,
        kl_history,
    })
}

/// Embedding of `x` into `params.out_dims` dimensions.
pub fn tsne(x: &Matrix, params: &TsneParams) -> Result<Matrix> {
    Ok(tsne_run(x, params)?.embedding)
}

fn center(y: &mut Matrix) {
    let m = y.column_means();
    for r in 0..y.rows() {
        for (v, mu) in y.row_mut(r).iter_mut().zip(&m) {
            *v -= mu;
        }
    }
}

/// Places new points into a fitted embedding as the affinity-weighted mean
/// of the training embedding, using each query's own perplexity-calibrated
/// Gaussian over its distances to the training points.
pub fn tsne_extend(
    train_x: &Matrix,
    train_y: &Matrix,
    queries: &Matrix,
    perplexity: f64,
) -> Result<Matrix> {
    let n = train_x.rows();
    if queries.cols() != train_x.cols() {
        return Err(Error::Dimension {
            expected: train_x.cols(),
            got: queries.cols(),
        });
    }
    let target = perplexity.min(n as f64 - 1.0).max(1.0);
    let log_target = log(target);
    let mut out = Matrix::zeros(queries.rows(), train_y.cols());
    let mut d = vec![0.0; n + 1];
    let mut w = vec![0.0; n + 1];
    for (q, row) in queries.iter_rows().enumerate() {
        // Slot n is a dummy self entry so the row helper can be reused.
        for (j, t) in train_x.iter_rows().enumerate() {
            d[j] = t.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
        }
        d[n] = 0.0;
        let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0);
        for _ in 0..200 {
            let h = conditional_row(&d, n, beta, &mut w);
            if libm::fabs(h - log_target) < 1e-6 {
                break;
            }
            if h > log_target {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        conditional_row(&d, n, beta, &mut w);
        let o = out.row_mut(q);
        for (j, yj) in train_y.iter_rows().enumerate() {
            for (oc, v) in o.iter_mut().zip(yj) {
                *oc += w[j] * v;
            }
        }
    }
    Ok(out)
}
