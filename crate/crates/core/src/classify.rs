//! kNN, one-vs-all SVM, boosted stumps, and random forests.
//!
//! Labels are class indices `0..n_classes`. Every decision that can tie
//! resolves to the smallest class index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, round, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::Matrix;
use crate::rng::derive;
use rand::Rng;

fn check_xy(x: &Matrix, y: &[usize]) -> Result<usize> {
    if x.rows() != y.len() {
        return Err(Error::Dimension {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(param("empty training set"));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite training feature".into()));
    }
    Ok(y.iter().copied().max().unwrap_or(0) + 1)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

/// Per-column z-scoring with the population standard deviation. Constant
/// columns map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((v, a), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (a - m) * (a - m);
            }
        }
        let std = var.into_iter().map(|v| sqrt(v / n)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        let mut out = Vec::with_capacity(x.rows() * x.cols());
        for row in x.iter_rows() {
            out.extend(self.apply(row));
        }
        Matrix::from_vec(x.rows(), x.cols(), out).expect("shape preserved")
    }
}

// ---------------------------------------------------------------- kNN

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cityblock,
    Cosine,
    Correlation,
}

impl Metric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cityblock" => Ok(Metric::Cityblock),
            "cosine" => Ok(Metric::Cosine),
            "correlation" => Ok(Metric::Correlation),
            _ => Err(param(format!("unknown metric `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Cityblock => "cityblock",
            Metric::Cosine => "cosine",
            Metric::Correlation => "correlation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnRule {
    /// Class with the most neighbours.
    Majority,
    /// Class with the largest summed similarity.
    Weighted,
}

impl KnnRule {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "majority" => Ok(KnnRule::Majority),
            "weighted" => Ok(KnnRule::Weighted),
            _ => Err(param(format!("unknown kNN rule `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KnnRule::Majority => "majority",
            KnnRule::Weighted => "weighted",
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Distance under `metric`. Cosine and correlation fall back to Euclidean
/// when either vector has zero norm (after centring, for correlation).
pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    let angular = |a: &[f64], b: &[f64], ma: f64, mb: f64| {
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let (x, y) = (x - ma, y - mb);
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        if aa == 0.0 || bb == 0.0 {
            log::debug!("zero-norm vector under {metric:?}; using euclidean for this pair");
            None
        } else {
            Some(1.0 - ab / (sqrt(aa) * sqrt(bb)))
        }
    };
    match metric {
        Metric::Euclidean => euclidean(a, b),
        Metric::Cityblock => a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum(),
        Metric::Cosine => angular(a, b, 0.0, 0.0).unwrap_or_else(|| euclidean(a, b)),
        Metric::Correlation => {
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            angular(a, b, ma, mb).unwrap_or_else(|| euclidean(a, b))
        }
    }
}

/// Similarity used by the weighted rule: `1 - d` for the angular metrics,
/// `1 / (1 + d)` for the others.
pub fn similarity(metric: Metric, d: f64) -> f64 {
    match metric {
        Metric::Cosine | Metric::Correlation => 1.0 - d,
        Metric::Euclidean | Metric::Cityblock => 1.0 / (1.0 + d),
    }
}

/// Decision over `(class, similarity)` neighbours.
pub fn knn_decide(neighbors: &[(usize, f64)], rule: KnnRule, n_classes: usize) -> usize {
    let mut score = vec![0.0; n_classes];
    for &(c, s) in neighbors {
        score[c] += match rule {
            KnnRule::Majority => 1.0,
            KnnRule::Weighted => s,
        };
    }
    argmax(&score)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub k: usize,
    pub metric: Metric,
    pub rule: KnnRule,
    pub n_classes: usize,
}

pub fn knn_train(
    x: &Matrix,
    y: &[usize],
    k: usize,
    metric: Metric,
    rule: KnnRule,
) -> Result<KnnModel> {
    let n_classes = check_xy(x, y)?;
    if k == 0 || k > x.rows() {
        return Err(param(format!("k = {k} must lie in 1..={}", x.rows())));
    }
    Ok(KnnModel {
        x: x.clone(),
        y: y.to_vec(),
        k,
        metric,
        rule,
        n_classes,
    })
}

pub fn knn_predict(model: &KnnModel, q: &[f64]) -> usize {
    let mut d: Vec<(f64, usize)> = model
        .x
        .iter_rows()
        .enumerate()
        .map(|(i, r)| (distance(model.metric, r, q), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nb: Vec<(usize, f64)> = d[..model.k]
        .iter()
        .map(|&(dist, i)| (model.y[i], similarity(model.metric, dist)))
        .collect();
    knn_decide(&nb, model.rule, model.n_classes)
}

// ---------------------------------------------------------------- SVM

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `(x . z + 1)^2`.
    Quadratic,
    /// `exp(-gamma |x - z|^2)`.
    Rbf,
}

impl Kernel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Kernel::Linear),
            "quadratic" => Ok(Kernel::Quadratic),
            "rbf" => Ok(Kernel::Rbf),
            _ => Err(param(format!("unknown kernel `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Quadratic => "quadratic",
            Kernel::Rbf => "rbf",
        }
    }

    pub fn eval(self, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => dot(a, b),
            Kernel::Quadratic => {
                let v = dot(a, b) + 1.0;
                v * v
            }
            Kernel::Rbf => {
                exp(-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// RBF width; `None` means `1 / D`.
    pub gamma: Option<f64>,
    /// Stopping gap on the maximal violating pair.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: Kernel::Linear,
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

/// Solution of one binary soft-margin dual.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// `-rho`: the decision function is `Σ alpha_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    /// Dual objective `Σ alpha - ½ alpha^T Q alpha` after every update.
    pub objective: Vec<f64>,
    /// Final maximal-violating-pair gap.
    pub gap: f64,
    pub iterations: usize,
}

/// SMO with maximal-violating-pair selection on a precomputed kernel
/// matrix (row-major `n x n`) and labels `±1`.
pub fn smo_solve(kmat: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[i * n + j];
    let mut alpha = vec![0.0; n];
    // Gradient of ½ a^T Q a - e^T a.
    let mut g = vec![-1.0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut gap;
    loop {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * g[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        gap = gmax - gmin;
        if gap < tol || i == usize::MAX || j == usize::MAX || iterations >= max_iter {
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        let qii = kmat[i * n + i];
        let qjj = kmat[j * n + j];
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(1e-12);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(1e-12);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += q(i, t) * di + q(j, t) * dj;
        }
        // Σ a - ½ a^T Q a = Σ a - ½ a^T (g + 1).
        let obj: f64 = alpha
            .iter()
            .zip(&g)
            .map(|(a, gt)| a - 0.5 * a * (gt + 1.0))
            .sum();
        objective.push(obj);
    }
    if iterations >= max_iter {
        log::warn!("SMO stopped at the iteration cap with gap {gap}");
    }
    // rho: average of y g over free variables, else the midpoint of bounds.
    let (mut sum, mut nfree) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            nfree += 1;
        } else {
            let at_upper = alpha[t] >= c;
            if (at_upper && y[t] < 0.0) || (!at_upper && y[t] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
    }
    let rho = if nfree > 0 {
        sum / nfree as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    DualSolution {
        alpha,
        bias: -rho,
        objective,
        gap: gap.max(0.0),
        iterations,
    }
}

/// Largest KKT violation of a solution: for each variable, how far its
/// margin `y_i f(x_i)` is from what its multiplier requires (`>= 1` at 0,
/// `= 1` when free, `<= 1` at C).
pub fn kkt_violation(kmat: &[f64], y: &[f64], sol: &DualSolution, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n)
            .map(|j| sol.alpha[j] * y[j] * kmat[j * n + i])
            .sum::<f64>()
            + sol.bias;
        let m = y[i] * f;
        let a = sol.alpha[i];
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            libm::fabs(m - 1.0)
        };
        worst = worst.max(v);
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    /// Indices of support vectors into the model's training rows.
    pub support: Vec<usize>,
    /// `alpha_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub c: f64,
    pub scaler: Standardizer,
    /// Standardized training rows referenced by the machines.
    pub train: Matrix,
    /// One machine per class, that class against the rest.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.apply(x);
        let kv: Vec<f64> = self
            .train
            .iter_rows()
            .map(|r| self.kernel.eval(self.gamma, r, &z))
            .collect();
        self.machines
            .iter()
            .map(|m| {
                m.support
                    .iter()
                    .zip(&m.coef)
                    .map(|(&i, c)| c * kv[i])
                    .sum::<f64>()
                    + m.bias
            })
            .collect()
    }
}

pub fn kernel_matrix(x: &Matrix, kernel: Kernel, gamma: f64) -> Vec<f64> {
    let n = x.rows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(gamma, x.row(i), x.row(j));
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// One-vs-all SVM on standardized features.
pub fn svm_train(x: &Matrix, y: &[usize], params: &SvmParams) -> Result<SvmModel> {
    let n_classes = check_xy(x, y)?;
    if !(params.c > 0.0) {
        return Err(param("C must be positive"));
    }
    let present = (0..n_classes).filter(|c| y.contains(c)).count();
    if present < 2 {
        return Err(param("SVM needs at least two classes"));
    }
    let scaler = Standardizer::fit(x);
    let z = scaler.apply_matrix(x);
    let gamma = params.gamma.unwrap_or(1.0 / x.cols() as f64);
    let kmat = kernel_matrix(&z, params.kernel, gamma);
    let machines = (0..n_classes)
        .map(|cls| {
            let yb: Vec<f64> = y
                .iter()
                .map(|&l| if l == cls { 1.0 } else { -1.0 })
                .collect();
            if !y.contains(&cls) {
                // Absent class: a machine that never wins.
                return BinarySvm {
                    support: Vec::new(),
                    coef: Vec::new(),
                    bias: f64::MIN,
                };
            }
            let sol = smo_solve(&kmat, &yb, params.c, params.tol, params.max_iter);
            let support: Vec<usize> = (0..yb.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
            let coef = support.iter().map(|&i| sol.alpha[i] * yb[i]).collect();
            BinarySvm {
                support,
                coef,
                bias: sol.bias,
            }
        })
        .collect();
    Ok(SvmModel {
        kernel: params.kernel,
        gamma,
        c: params.c,
        scaler,
        train: z,
        machines,
    })
}

pub fn svm_predict(model: &SvmModel, x: &[f64]) -> usize {
    argmax(&model.decision_values(x))
}

// ---------------------------------------------------------------- boosting

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostVariant {
    GentleboostBinary,
    AdaboostM2,
}

impl BoostVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gentleboost" | "gentleboost_binary" => Ok(BoostVariant::GentleboostBinary),
            "adaboost_m2" | "adaboostm2" => Ok(BoostVariant::AdaboostM2),
            _ => Err(param(format!("unknown boosting variant `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoostVariant::GentleboostBinary => "gentleboost",
            BoostVariant::AdaboostM2 => "adaboost_m2",
        }
    }
}

/// Regression stump: `left` if `x[feature] <= threshold`, else `right`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionStump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl RegressionStump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

/// Multiclass stump with a 0/1 plausibility per class on each side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassStump {
    pub feature: usize,
    pub threshold: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl ClassStump {
    pub fn eval(&self, x: &[f64]) -> &[f64] {
        if x[self.feature] <= self.threshold {
            &self.left
        } else {
            &self.right
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoostModel {
    /// Additive regression stumps; positive score means class 1.
    Gentle {
        scaler: Standardizer,
        stumps: Vec<RegressionStump>,
    },
    /// Stumps with their vote weights `log(1 / beta_t)`.
    M2 {
        scaler: Standardizer,
        n_classes: usize,
        stumps: Vec<(ClassStump, f64)>,
    },
}

/// Feature order and split points: `(sorted row indices, thresholds between
/// distinct consecutive values)` per feature.
fn sorted_features(x: &Matrix) -> Vec<Vec<usize>> {
    (0..x.cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.rows()).collect();
            idx.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

fn fit_regression_stump(
    x: &Matrix,
    order: &[Vec<usize>],
    y: &[f64],
    w: &[f64],
) -> Option<RegressionStump> {
    let total_w: f64 = w.iter().sum();
    let total_wy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut best: Option<(f64, RegressionStump)> = None;
    for (f, idx) in order.iter().enumerate() {
        let (mut lw, mut lwy) = (0.0, 0.0);
        for p in 0..idx.len() - 1 {
            let i = idx[p];
            lw += w[i];
            lwy += w[i] * y[i];
            let (a, b) = (x[(i, f)], x[(idx[p + 1], f)]);
            if a == b {
                continue;
            }
            let (rw, rwy) = (total_w - lw, total_wy - lwy);
            // Weighted squared error up to a constant is -(S_l^2/W_l + S_r^2/W_r).
            let gain = if lw > 0.0 { lwy * lwy / lw } else { 0.0 }
                + if rw > 0.0 { rwy * rwy / rw } else { 0.0 };
            if best.as_ref().map_or(true, |(g, _)| gain > *g) {
                best = Some((
                    gain,
                    RegressionStump {
                        feature: f,
                        threshold: (a + b) / 2.0,
                        left: if lw > 0.0 { lwy / lw } else { 0.0 },
                        right: if rw > 0.0 { rwy / rw } else { 0.0 },
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Pseudo-loss stump: per side, class `c` is marked plausible when doing
/// so lowers the pseudo-loss.
fn fit_class_stump(
    x: &Matrix,
    order: &[Vec<usize>],
    y: &[usize],
    d: &[Vec<f64>],
    n_classes: usize,
) -> Option<(ClassStump, f64)> {
    let n = y.len();
    // q[c]: mislabel mass of points of class c; r[c]: mass on label c from
    // points of other classes.
    let wt: Vec<f64> = d.iter().map(|row| row.iter().sum()).collect();
    let mut tq = vec![0.0; n_classes];
    let mut tr = vec![0.0; n_classes];
    for i in 0..n {
        tq[y[i]] += wt[i];
        for c in 0..n_classes {
            tr[c] += d[i][c];
        }
    }
    let side = |q: &[f64], r: &[f64]| -> (Vec<f64>, f64) {
        let mut h = vec![0.0; n_classes];
        let mut s = 0.0;
        for c in 0..n_classes {
            if r[c] - q[c] < 0.0 {
                h[c] = 1.0;
                s += r[c] - q[c];
            }
        }
        (h, s)
    };
    let total: f64 = wt.iter().sum();
    let mut best: Option<(f64, ClassStump)> = None;
    for (f, idx) in order.iter().enumerate() {
        let mut lq = vec![0.0; n_classes];
        let mut lr = vec![0.0; n_classes];
        for p in 0..n - 1 {
            let i = idx[p];
            lq[y[i]] += wt[i];
            for c in 0..n_classes {
                lr[c] += d[i][c];
            }
            let (a, b) = (x[(i, f)], x[(idx[p + 1], f)]);
            if a == b {
                continue;
            }
            let rq: Vec<f64> = tq.iter().zip(&lq).map(|(t, l)| t - l).collect();
            let rr: Vec<f64> = tr.iter().zip(&lr).map(|(t, l)| t - l).collect();
            let (hl, sl) = side(&lq, &lr);
            let (hr, sr) = side(&rq, &rr);
            let eps = 0.5 * (total + sl + sr);
            if best.as_ref().map_or(true, |(e, _)| eps < *e) {
                best = Some((
                    eps,
                    ClassStump {
                        feature: f,
                        threshold: (a + b) / 2.0,
                        left: hl,
                        right: hr,
                    },
                ));
            }
        }
    }
    best.map(|(e, s)| (s, e))
}

pub fn boost_train(
    x: &Matrix,
    y: &[usize],
    variant: BoostVariant,
    rounds: usize,
) -> Result<BoostModel> {
    let n_classes = check_xy(x, y)?;
    if rounds == 0 {
        return Err(param("rounds must be at least 1"));
    }
    let scaler = Standardizer::fit(x);
    let z = scaler.apply_matrix(x);
    let order = sorted_features(&z);
    let n = y.len();
    match variant {
        BoostVariant::GentleboostBinary => {
            if n_classes != 2 || !y.contains(&0) {
                return Err(param("GentleBoost needs exactly two classes"));
            }
            let ys: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
            let mut w = vec![1.0 / n as f64; n];
            let mut stumps = Vec::with_capacity(rounds);
            for _ in 0..rounds {
                let Some(s) = fit_regression_stump(&z, &order, &ys, &w) else {
                    break;
                };
                let mut sum = 0.0;
                for i in 0..n {
                    w[i] *= exp(-ys[i] * s.eval(z.row(i)));
                    sum += w[i];
                }
                w.iter_mut().for_each(|v| *v /= sum);
                stumps.push(s);
            }
            Ok(BoostModel::Gentle { scaler, stumps })
        }
        BoostVariant::AdaboostM2 => {
            if n_classes < 2 {
                return Err(param("AdaBoost.M2 needs at least two classes"));
            }
            let mislabels = (n * (n_classes - 1)) as f64;
            let mut d: Vec<Vec<f64>> = y
                .iter()
                .map(|&l| {
                    (0..n_classes)
                        .map(|c| if c == l { 0.0 } else { 1.0 / mislabels })
                        .collect()
                })
                .collect();
            let mut stumps = Vec::with_capacity(rounds);
            for _ in 0..rounds {
                let Some((s, eps)) = fit_class_stump(&z, &order, y, &d, n_classes) else {
                    break;
                };
                if eps >= 0.5 - 1e-12 {
                    break;
                }
                let eps = eps.max(1e-10);
                let beta = eps / (1.0 - eps);
                let mut sum = 0.0;
                for i in 0..n {
                    let h = s.eval(z.row(i));
                    for c in 0..n_classes {
                        if c != y[i] {
                            d[i][c] *= libm::pow(beta, 0.5 * (1.0 + h[y[i]] - h[c]));
                            sum += d[i][c];
                        }
                    }
                }
                d.iter_mut().flatten().for_each(|v| *v /= sum);
                stumps.push((s, log(1.0 / beta)));
            }
            Ok(BoostModel::M2 {
                scaler,
                n_classes,
                stumps,
            })
        }
    }
}

pub fn boost_predict(model: &BoostModel, x: &[f64]) -> usize {
    match model {
        BoostModel::Gentle { scaler, stumps } => {
            let z = scaler.apply(x);
            let f: f64 = stumps.iter().map(|s| s.eval(&z)).sum();
            usize::from(f > 0.0)
        }
        BoostModel::M2 {
            scaler,
            n_classes,
            stumps,
        } => {
            let z = scaler.apply(x);
            let mut score = vec![0.0; *n_classes];
            for (s, w) in stumps {
                for (sc, h) in score.iter_mut().zip(s.eval(&z)) {
                    *sc += w * h;
                }
            }
            argmax(&score)
        }
    }
}

// ---------------------------------------------------------------- forest

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { class } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - counts
        .iter()
        .map(|c| (c / total) * (c / total))
        .sum::<f64>()
}

struct TreeBuilder<'a, R: Rng> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
}

impl<R: Rng> TreeBuilder<'_, R> {
    fn majority(&self, rows: &[usize]) -> usize {
        let mut counts = vec![0.0; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1.0;
        }
        argmax(&counts)
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let mut total = vec![0.0; self.n_classes];
        for &r in rows {
            total[self.y[r]] += 1.0;
        }
        let n = rows.len() as f64;
        for &f in features {
            let mut idx = rows.to_vec();
            idx.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let mut left = vec![0.0; self.n_classes];
            for p in 0..idx.len() - 1 {
                left[self.y[idx[p]]] += 1.0;
                let (a, b) = (self.x[(idx[p], f)], self.x[(idx[p + 1], f)]);
                if a == b {
                    continue;
                }
                let nl = (p + 1) as f64;
                let right: Vec<f64> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let score = nl / n * gini(&left, nl) + (n - nl) / n * gini(&right, n - nl);
                if best.map_or(true, |(_, _, s)| score < s) {
                    best = Some((f, (a + b) / 2.0, score));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let class = self.majority(&rows);
        self.nodes.push(TreeNode::Leaf { class });
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if pure || rows.len() < 2 || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let varying: Vec<usize> = (0..self.x.cols())
            .filter(|&f| rows.iter().any(|&r| self.x[(r, f)] != self.x[(rows[0], f)]))
            .collect();
        if varying.is_empty() {
            return id;
        }
        let m = (round(sqrt(varying.len() as f64)) as usize).clamp(1, varying.len());
        let mut pool = varying;
        // Partial Fisher-Yates: the first m entries are the sample.
        for a in 0..m {
            let b = self.rng.gen_range(a..pool.len());
            pool.swap(a, b);
        }
        let mut chosen = pool[..m].to_vec();
        chosen.sort_unstable();
        let Some((feature, threshold, _)) = self.best_split(&rows, &chosen) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

pub fn rf_train(x: &Matrix, y: &[usize], params: &ForestParams) -> Result<ForestModel> {
    let n_classes = check_xy(x, y)?;
    if params.n_trees == 0 {
        return Err(param("n_trees must be at least 1"));
    }
    let n = y.len();
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = derive(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = TreeBuilder {
                x,
                y,
                n_classes,
                max_depth: params.max_depth,
                rng: &mut rng,
                nodes: Vec::new(),
            };
            b.grow(rows, 0);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel { n_classes, trees })
}

pub fn rf_predict(model: &ForestModel, x: &[f64]) -> usize {
    let mut votes = vec![0.0; model.n_classes];
    for t in &model.trees {
        votes[t.predict(x)] += 1.0;
    }
    argmax(&votes)
}

// ---------------------------------------------------------------- unified

/// Classifier choice with its hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn {
        k: usize,
        metric: Metric,
        rule: KnnRule,
    },
    Svm(SvmParams),
    Boost {
        variant: BoostVariant,
        rounds: usize,
    },
    RandomForest(ForestParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn(KnnModel),
    SvmOva(SvmModel),
    Boost(BoostModel),
    RandomForest(ForestModel),
}

impl ClassifierSpec {
    /// Data-independent parameter checks.
    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::Knn { k: 0, .. } => Err(param("k must be at least 1")),
            ClassifierSpec::Svm(p) if !(p.c > 0.0) || !(p.tol > 0.0) => {
                Err(param("svm needs c > 0 and tol > 0"))
            }
            ClassifierSpec::Svm(SvmParams { gamma: Some(g), .. }) if !(*g > 0.0) => {
                Err(param("svm gamma must be positive"))
            }
            ClassifierSpec::Boost { rounds: 0, .. } => Err(param("rounds must be at least 1")),
            ClassifierSpec::RandomForest(p) if p.n_trees == 0 => {
                Err(param("n_trees must be at least 1"))
            }
            _ => Ok(()),
        }
    }
}

pub fn train(spec: &ClassifierSpec, x: &Matrix, y: &[usize]) -> Result<TrainedModel> {
    Ok(match spec {
        ClassifierSpec::Knn { k, metric, rule } => {
            TrainedModel::Knn(knn_train(x, y, *k, *metric, *rule)?)
        }
        ClassifierSpec::Svm(p) => TrainedModel::SvmOva(svm_train(x, y, p)?),
        ClassifierSpec::Boost { variant, rounds } => {
            TrainedModel::Boost(boost_train(x, y, *variant, *rounds)?)
        }
        ClassifierSpec::RandomForest(p) => TrainedModel::RandomForest(rf_train(x, y, p)?),
    })
}

impl TrainedModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            TrainedModel::Knn(m) => knn_predict(m, x),
            TrainedModel::SvmOva(m) => svm_predict(m, x),
            TrainedModel::Boost(m) => boost_predict(m, x),
            TrainedModel::RandomForest(m) => rf_predict(m, x),
        }
    }

    pub fn predict_all(&self, x: &Matrix) -> Vec<usize> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}
