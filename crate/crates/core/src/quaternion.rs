//! Quaternion algebra and quaternion PCA over four-channel EEG.
//!
//! Four frontal channels are bound into one quaternion per sample. A window
//! of `F` samples is a quaternion vector in `H^F`; PCA in that space is
//! solved through the complex `2F x 2F` form of the covariance, whose
//! spectrum repeats every eigenvalue twice.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use libm::sqrt;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataio::EegRecording;
use crate::error::{param, Error, Result};
use crate::linalg::{hermitian_eigen_top, CMatrix};

/// A quaternion `r + i*i + j*j + k*k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub r: f64,
    pub i: f64,
    pub j: f64,
    pub k: f64,
}

impl Quat {
    pub const ZERO: Quat = Quat::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(r: f64, i: f64, j: f64, k: f64) -> Self {
        Self { r, i, j, k }
    }

    /// Hamilton conjugate `q^H`.
    pub fn conj(self) -> Self {
        Self::new(self.r, -self.i, -self.j, -self.k)
    }

    pub fn norm_sqr(self) -> f64 {
        self.r * self.r + self.i * self.i + self.j * self.j + self.k * self.k
    }

    pub fn norm(self) -> f64 {
        sqrt(self.norm_sqr())
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.r * s, self.i * s, self.j * s, self.k * s)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r, self.i, self.j, self.k]
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// The 2x2 complex matrix `[[r + i𝕚, j + k𝕚], [-j + k𝕚, r - i𝕚]]`.
    pub fn to_complex(self) -> [[Complex64; 2]; 2] {
        [
            [
                Complex64::new(self.r, self.i),
                Complex64::new(self.j, self.k),
            ],
            [
                Complex64::new(-self.j, self.k),
                Complex64::new(self.r, -self.i),
            ],
        ]
    }

    /// The pair `(a, b)` with `a = r + i𝕚`, `b = j + k𝕚`, i.e. the first row
    /// of [`Quat::to_complex`].
    pub fn complex_pair(self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.r, self.i),
            Complex64::new(self.j, self.k),
        )
    }

    pub fn from_complex_pair(a: Complex64, b: Complex64) -> Self {
        Self::new(a.re, a.im, b.re, b.im)
    }
}

/// Hamilton product.
pub fn qmul(a: Quat, b: Quat) -> Quat {
    Quat::new(
        a.r * b.r - a.i * b.i - a.j * b.j - a.k * b.k,
        a.r * b.i + a.i * b.r + a.j * b.k - a.k * b.j,
        a.r * b.j - a.i * b.k + a.j * b.r + a.k * b.i,
        a.r * b.k + a.i * b.j - a.j * b.i + a.k * b.r,
    )
}

pub fn qconj(q: Quat) -> Quat {
    q.conj()
}

pub fn qnorm(q: Quat) -> f64 {
    q.norm()
}

/// See [`Quat::to_complex`].
pub fn quat_to_complex(q: Quat) -> [[Complex64; 2]; 2] {
    q.to_complex()
}

impl Add for Quat {
    type Output = Quat;
    fn add(self, o: Quat) -> Quat {
        Quat::new(self.r + o.r, self.i + o.i, self.j + o.j, self.k + o.k)
    }
}

impl Sub for Quat {
    type Output = Quat;
    fn sub(self, o: Quat) -> Quat {
        Quat::new(self.r - o.r, self.i - o.i, self.j - o.j, self.k - o.k)
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        Quat::new(-self.r, -self.i, -self.j, -self.k)
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        qmul(self, o)
    }
}

/// Assignment of four EEG channels to the quaternion slots `(r, i, j, k)`,
/// each with a sign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMap {
    slots: [(String, f64); 4],
}

impl ChannelMap {
    /// `q_A = (F7, F8, AF3, AF4)`: lateral channels on `r, i`, frontal on `j, k`.
    pub fn preset_a() -> Self {
        Self {
            slots: [
                ("F7".into(), 1.0),
                ("F8".into(), 1.0),
                ("AF3".into(), 1.0),
                ("AF4".into(), 1.0),
            ],
        }
    }

    /// `q_B = (q_r, -q_j, q_i, q_k)` relative to `q_A`.
    pub fn preset_b() -> Self {
        Self {
            slots: [
                ("F7".into(), 1.0),
                ("AF3".into(), -1.0),
                ("F8".into(), 1.0),
                ("AF4".into(), 1.0),
            ],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "A" | "a" | "q_a" => Some(Self::preset_a()),
            "B" | "b" | "q_b" => Some(Self::preset_b()),
            _ => None,
        }
    }

    /// Custom assignment; channel names must be distinct and signs `±1`.
    pub fn new(slots: [(String, f64); 4]) -> Result<Self> {
        for (a, (name, sign)) in slots.iter().enumerate() {
            if *sign != 1.0 && *sign != -1.0 {
                return Err(param("channel map signs must be +1 or -1"));
            }
            if slots[..a].iter().any(|(other, _)| other == name) {
                return Err(param(alloc::format!("channel `{name}` mapped twice")));
            }
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[(String, f64); 4] {
        &self.slots
    }
}

/// One quaternion per sample according to `map`.
pub fn eeg_to_quats(rec: &EegRecording, map: &ChannelMap) -> Result<Vec<Quat>> {
    let mut cols: Vec<(&[f64], f64)> = Vec::with_capacity(4);
    for (name, sign) in &map.slots {
        let series = rec
            .channel(name)
            .ok_or_else(|| Error::MissingChannel(name.clone()))?;
        cols.push((series, *sign));
    }
    let n = rec.len();
    Ok((0..n)
        .map(|t| {
            Quat::new(
                cols[0].1 * cols[0].0[t],
                cols[1].1 * cols[1].0[t],
                cols[2].1 * cols[2].0[t],
                cols[3].1 * cols[3].0[t],
            )
        })
        .collect())
}

/// Quaternion inner product `u^H v`.
pub fn qdot(u: &[Quat], v: &[Quat]) -> Quat {
    u.iter()
        .zip(v)
        .fold(Quat::ZERO, |acc, (&a, &b)| acc + qmul(a.conj(), b))
}

/// Fitted quaternion PCA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpcaModel {
    pub mean: Vec<Quat>,
    /// Retained eigenvectors, one quaternion vector of length `F` each.
    pub components: Vec<Vec<Quat>>,
    /// Non-negative eigenvalues of `S = X̄ X̄^H`, descending.
    pub eigenvalues: Vec<f64>,
}

impl QpcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Complex form of the centered data: `2F x 2N` with block
/// `[[A_r + i A_i, A_j + i A_k], [-A_j + i A_k, A_r - i A_i]]`.
fn centered_complex_form(data: &[Vec<Quat>], mean: &[Quat]) -> CMatrix {
    let f = mean.len();
    let n = data.len();
    let mut x = CMatrix::zeros(2 * f, 2 * n);
    for (col, sample) in data.iter().enumerate() {
        for (row, (&q, &m)) in sample.iter().zip(mean).enumerate() {
            let c = (q - m).to_complex();
            x[(row, col)] = c[0][0];
            x[(row, n + col)] = c[0][1];
            x[(f + row, col)] = c[1][0];
            x[(f + row, n + col)] = c[1][1];
        }
    }
    x
}

fn check_data(data: &[Vec<Quat>]) -> Result<usize> {
    if data.len() < 2 {
        return Err(param("quaternion PCA needs at least two samples"));
    }
    let f = data[0].len();
    if f == 0 {
        return Err(param("quaternion vectors must be non-empty"));
    }
    for s in data {
        if s.len() != f {
            return Err(Error::Dimension {
                expected: f,
                got: s.len(),
            });
        }
        if s.iter().any(|q| !q.is_finite()) {
            return Err(Error::Format("non-finite quaternion sample".into()));
        }
    }
    Ok(f)
}

fn mean_vector(data: &[Vec<Quat>], f: usize) -> Vec<Quat> {
    let mut mean = vec![Quat::ZERO; f];
    for s in data {
        for (m, &q) in mean.iter_mut().zip(s) {
            *m = *m + q;
        }
    }
    let inv = 1.0 / data.len() as f64;
    mean.iter_mut().for_each(|m| *m = m.scale(inv));
    mean
}

/// Eigen-solution in complex form: all `2F` eigenvalues of `S̃` (descending,
/// padded with zeros when solved through the Gram matrix) and unit complex
/// eigenvectors of length `2F` for the largest `want` of them.
struct ComplexSpectrum {
    values: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
}

fn complex_spectrum(x: &CMatrix, want: usize) -> Result<ComplexSpectrum> {
    let rows = x.rows(); // 2F
    let cols = x.cols(); // 2N
    if rows <= cols {
        // Direct: S̃ = X̃ X̃^H.
        let s = x.conj_transpose().gram();
        let eig = hermitian_eigen_top(&s, want.min(rows))?;
        return Ok(ComplexSpectrum {
            values: eig.values,
            vectors: eig.vectors,
        });
    }
    // Gram route: B = X̃^H X̃ shares the non-zero spectrum with S̃ and its
    // eigenvectors lift as U_A = X̃ U_B Λ^{-1/2}.
    let b = x.gram();
    let eig = hermitian_eigen_top(&b, want.min(cols))?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = top * 1e-12 * cols as f64;
    let mut vectors = Vec::new();
    for (lam, ub) in eig.values.iter().zip(&eig.vectors) {
        if *lam <= cutoff || *lam <= 0.0 {
            break;
        }
        let inv = 1.0 / sqrt(*lam);
        let mut ua = vec![Complex64::new(0.0, 0.0); rows];
        for (r, out) in ua.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for (a, b) in x.row(r).iter().zip(ub) {
                s += a * b;
            }
            *out = s * inv;
        }
        vectors.push(ua);
    }
    let mut values = eig.values;
    values.resize(rows, 0.0);
    Ok(ComplexSpectrum { values, vectors })
}

/// The `2F` eigenvalues of the complex covariance form `S̃`, descending,
/// computed along the same route [`quaternion_pca_fit`] takes.
pub fn covariance_spectrum(data: &[Vec<Quat>]) -> Result<Vec<f64>> {
    let f = check_data(data)?;
    let mean = mean_vector(data, f);
    let x = centered_complex_form(data, &mean);
    Ok(complex_spectrum(&x, 0)?.values)
}

/// Complex column `w = [u_a; -conj(u_b)]` of the quaternion vector `u`.
fn first_column(u: &[Quat]) -> Vec<Complex64> {
    let f = u.len();
    let mut w = vec![Complex64::new(0.0, 0.0); 2 * f];
    for (t, q) in u.iter().enumerate() {
        let (a, b) = q.complex_pair();
        w[t] = a;
        w[f + t] = -b.conj();
    }
    w
}

/// Second complex column `[u_b; conj(u_a)]`.
fn second_column(u: &[Quat]) -> Vec<Complex64> {
    let f = u.len();
    let mut w = vec![Complex64::new(0.0, 0.0); 2 * f];
    for (t, q) in u.iter().enumerate() {
        let (a, b) = q.complex_pair();
        w[t] = b;
        w[f + t] = a.conj();
    }
    w
}

fn from_first_column(w: &[Complex64]) -> Vec<Quat> {
    let f = w.len() / 2;
    (0..f)
        .map(|t| Quat::from_complex_pair(w[t], -w[f + t].conj()))
        .collect()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |s, (x, y)| s + x.conj() * y)
}

/// Projects out the complex span of every accepted quaternion vector and
/// returns the normalized residual if anything substantial is left.
fn orthogonal_remainder(
    mut w: Vec<Complex64>,
    accepted: &[(Vec<Complex64>, Vec<Complex64>)],
) -> Option<Vec<Complex64>> {
    for _ in 0..2 {
        for (c1, c2) in accepted {
            let a = cdot(c1, &w);
            let b = cdot(c2, &w);
            for ((wi, x), y) in w.iter_mut().zip(c1).zip(c2) {
                *wi -= x * a + y * b;
            }
        }
    }
    let norm = sqrt(w.iter().map(|z| z.norm_sqr()).sum::<f64>());
    if norm < 1e-4 {
        return None;
    }
    w.iter_mut().for_each(|z| *z /= norm);
    Some(w)
}

/// Fits quaternion PCA with `k` retained components.
///
/// `S = X̄ X̄^H` is never formed in quaternion arithmetic; the eigenpairs come
/// from its complex form (or the smaller Gram matrix when `N < F`). Each
/// eigenvalue of the complex form appears twice; one representative
/// eigenvector per pair is mapped back to `H^F`.
pub fn quaternion_pca_fit(data: &[Vec<Quat>], k: usize) -> Result<QpcaModel> {
    let f = check_data(data)?;
    if k == 0 || k > f {
        return Err(param(alloc::format!("k must lie in 1..={f}, got {k}")));
    }
    let mean = mean_vector(data, f);
    let x = centered_complex_form(data, &mean);
    // Up to two complex eigenvectors per retained component, plus slack for
    // degenerate eigenspaces.
    let want = (2 * k + 2).min(2 * f);
    let spec = complex_spectrum(&x, want)?;

    let mut components: Vec<Vec<Quat>> = Vec::with_capacity(k);
    let mut cols: Vec<(Vec<Complex64>, Vec<Complex64>)> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (idx, w) in spec.vectors.into_iter().enumerate() {
        if components.len() == k {
            break;
        }
        if let Some(w) = orthogonal_remainder(w, &cols) {
            let u = from_first_column(&w);
            cols.push((first_column(&u), second_column(&u)));
            components.push(u);
            eigenvalues.push(spec.values[idx].max(0.0));
        }
    }
    // Null directions (zero variance) complete the basis when the data has
    // lower rank than k.
    let mut basis = 0;
    while components.len() < k && basis < 2 * f {
        let mut e = vec![Complex64::new(0.0, 0.0); 2 * f];
        e[basis] = Complex64::new(1.0, 0.0);
        basis += 1;
        if let Some(w) = orthogonal_remainder(e, &cols) {
            let u = from_first_column(&w);
            cols.push((first_column(&u), second_column(&u)));
            components.push(u);
            eigenvalues.push(0.0);
        }
    }
    for v in eigenvalues.iter_mut() {
        if *v < 1e-9 {
            *v = 0.0;
        }
    }
    Ok(QpcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// Projections `y_c = u_c^H (x - mean)`.
pub fn quaternion_pca_project_quats(model: &QpcaModel, sample: &[Quat]) -> Result<Vec<Quat>> {
    if sample.len() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: sample.len(),
        });
    }
    let centered: Vec<Quat> = sample
        .iter()
        .zip(&model.mean)
        .map(|(&x, &m)| x - m)
        .collect();
    Ok(model
        .components
        .iter()
        .map(|u| qdot(u, &centered))
        .collect())
}

/// Projections flattened to `4k` reals, `(r, i, j, k)` per component.
pub fn quaternion_pca_project(model: &QpcaModel, sample: &[Quat]) -> Result<Vec<f64>> {
    Ok(quaternion_pca_project_quats(model, sample)?
        .into_iter()
        .flat_map(Quat::to_array)
        .collect())
}

/// Reconstruction `mean + Σ u_c y_c`.
pub fn quaternion_pca_reconstruct(model: &QpcaModel, proj: &[Quat]) -> Vec<Quat> {
    let mut out = model.mean.clone();
    for (u, &y) in model.components.iter().zip(proj) {
        for (o, &uc) in out.iter_mut().zip(u) {
            *o = *o + qmul(uc, y);
        }
    }
    out
}
