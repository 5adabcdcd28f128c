//! Signal and landmark conditioning.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::dataio::{validate_frame, Frame, LandmarkSequence, Point, NOSE_TIP};
use crate::error::{param, Error, Result};

/// Z-score with the sample standard deviation.
pub fn normalize_channel(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(param("normalization needs at least 2 samples"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std = sqrt(var);
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::Degenerate(
            "constant series has zero standard deviation".into(),
        ));
    }
    Ok(series.iter().map(|v| (v - mean) / std).collect())
}

/// Running median over an odd window, edges padded by repeating the end
/// values.
pub fn median_filter(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(param(format!("median window must be odd, got {window}")));
    }
    if window > series.len() {
        return Err(param(format!(
            "median window {window} exceeds series length {}",
            series.len()
        )));
    }
    let half = (window / 2) as isize;
    let last = series.len() as isize - 1;
    let mut buf = vec![0.0; window];
    Ok((0..series.len() as isize)
        .map(|t| {
            for (slot, off) in buf.iter_mut().zip(-half..=half) {
                *slot = series[(t + off).clamp(0, last) as usize];
            }
            buf.sort_by(f64::total_cmp);
            buf[window / 2]
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnificationParams {
    pub alpha: f64,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub sample_rate_hz: f64,
}

impl Default for MagnificationParams {
    /// Tenfold gain on 0.5 to 3 Hz motion in 30 fps landmark video.
    fn default() -> Self {
        Self {
            alpha: 10.0,
            band_lo_hz: 0.5,
            band_hi_hz: 3.0,
            sample_rate_hz: crate::dataio::FACE_FPS,
        }
    }
}

impl MagnificationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(param("alpha must be non-negative"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(param("sample rate must be positive"));
        }
        let nyq = self.sample_rate_hz / 2.0;
        if !(0.0 < self.band_lo_hz && self.band_lo_hz < self.band_hi_hz && self.band_hi_hz < nyq) {
            return Err(param(format!(
                "passband [{}, {}] Hz must satisfy 0 < lo < hi < {nyq}",
                self.band_lo_hz, self.band_hi_hz
            )));
        }
        Ok(())
    }
}

/// Ideal bandpass: keeps DFT bins whose frequency lies in `[lo, hi]`.
pub fn ideal_bandpass(series: &[f64], lo_hz: f64, hi_hz: f64, sample_rate_hz: f64) -> Vec<f64> {
    let n = series.len();
    let nf = n as f64;
    let mut out = vec![0.0; n];
    // Real input: bins m and n - m are conjugate, so only m <= n/2 is visited.
    for m in 1..=n / 2 {
        let freq = m as f64 * sample_rate_hz / nf;
        if freq < lo_hz || freq > hi_hz {
            continue;
        }
        let w = 2.0 * PI * m as f64 / nf;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &x) in series.iter().enumerate() {
            let a = w * t as f64;
            re += x * cos(a);
            im -= x * sin(a);
        }
        let weight = if 2 * m == n { 1.0 } else { 2.0 };
        for (t, o) in out.iter_mut().enumerate() {
            let a = w * t as f64;
            *o += weight * (re * cos(a) - im * sin(a)) / nf;
        }
    }
    out
}

/// `x + alpha * B(x)` with `B` the ideal bandpass of `params`.
pub fn magnify_motion(series: &[f64], params: &MagnificationParams) -> Result<Vec<f64>> {
    params.validate()?;
    if series.len() < 8 {
        return Err(param("magnification needs at least 8 samples"));
    }
    let band = ideal_bandpass(
        series,
        params.band_lo_hz,
        params.band_hi_hz,
        params.sample_rate_hz,
    );
    Ok(series
        .iter()
        .zip(band)
        .map(|(x, b)| x + params.alpha * b)
        .collect())
}

/// Magnifies every landmark coordinate trajectory of a sequence.
pub fn magnify_landmarks(
    seq: &LandmarkSequence,
    params: &MagnificationParams,
) -> Result<LandmarkSequence> {
    let n = seq.frames.len();
    let mut frames = seq.frames.clone();
    let mut track = vec![0.0; n];
    for p in 0..frames[0].len() {
        for axis in 0..2 {
            for (t, f) in seq.frames.iter().enumerate() {
                track[t] = f[p][axis];
            }
            let out = magnify_motion(&track, params)?;
            for (f, v) in frames.iter_mut().zip(out) {
                f[p][axis] = v;
            }
        }
    }
    LandmarkSequence::new(seq.fps, frames)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Raw,
    Affine,
    NoseNormalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedFrame {
    pub points: Frame,
    pub provenance: Provenance,
}

/// Affine map `p -> A p + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Affine {
    pub fn apply(&self, p: Point) -> Point {
        [
            self.a[0][0] * p[0] + self.a[0][1] * p[1] + self.b[0],
            self.a[1][0] * p[0] + self.a[1][1] * p[1] + self.b[1],
        ]
    }
}

/// Sum of squared distances between `map(frame)` and `template`.
pub fn affine_residual(map: &Affine, frame: &[Point], template: &[Point]) -> f64 {
    frame
        .iter()
        .zip(template)
        .map(|(&p, q)| {
            let m = map.apply(p);
            (m[0] - q[0]) * (m[0] - q[0]) + (m[1] - q[1]) * (m[1] - q[1])
        })
        .sum()
}

fn centroid(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    let s = pts
        .iter()
        .fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

/// Second-moment matrix of points about `c`.
fn scatter(pts: &[Point], c: Point) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for p in pts {
        let d = [p[0] - c[0], p[1] - c[1]];
        for r in 0..2 {
            for s in 0..2 {
                m[r][s] += d[r] * d[s];
            }
        }
    }
    m
}

fn is_collinear(pts: &[Point]) -> bool {
    let c = centroid(pts);
    let m = scatter(pts, c);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let tr = m[0][0] + m[1][1];
    !(det > 1e-12 * tr * tr)
}

/// Least-squares affine map from `frame` onto `template`.
pub fn fit_affine(frame: &[Point], template: &[Point]) -> Result<Affine> {
    if frame.len() != template.len() {
        return Err(Error::Dimension {
            expected: template.len(),
            got: frame.len(),
        });
    }
    if is_collinear(template) {
        return Err(Error::Degenerate("alignment template is collinear".into()));
    }
    let cf = centroid(frame);
    let ct = centroid(template);
    let sff = scatter(frame, cf);
    let det = sff[0][0] * sff[1][1] - sff[0][1] * sff[1][0];
    let tr = sff[0][0] + sff[1][1];
    if !(det > 1e-12 * tr * tr) {
        return Err(Error::Degenerate("source frame is collinear".into()));
    }
    let inv = [
        [sff[1][1] / det, -sff[0][1] / det],
        [-sff[1][0] / det, sff[0][0] / det],
    ];
    // Cross moments: stf[r][s] = Σ (t_r - ct_r)(f_s - cf_s).
    let mut stf = [[0.0; 2]; 2];
    for (p, q) in frame.iter().zip(template) {
        let df = [p[0] - cf[0], p[1] - cf[1]];
        let dt = [q[0] - ct[0], q[1] - ct[1]];
        for r in 0..2 {
            for s in 0..2 {
                stf[r][s] += dt[r] * df[s];
            }
        }
    }
    let mut a = [[0.0; 2]; 2];
    for r in 0..2 {
        for s in 0..2 {
            a[r][s] = stf[r][0] * inv[0][s] + stf[r][1] * inv[1][s];
        }
    }
    let b = [
        ct[0] - a[0][0] * cf[0] - a[0][1] * cf[1],
        ct[1] - a[1][0] * cf[0] - a[1][1] * cf[1],
    ];
    Ok(Affine { a, b })
}

/// Maps `frame` onto `template` with the least-squares affine transform.
pub fn align_landmarks_affine(frame: &[Point], template: &[Point]) -> Result<AlignedFrame> {
    validate_frame(frame)?;
    validate_frame(template)?;
    let map = fit_affine(frame, template)?;
    Ok(AlignedFrame {
        points: frame.iter().map(|&p| map.apply(p)).collect(),
        provenance: Provenance::Affine,
    })
}

/// Translates the frame so the nose tip sits at the origin.
pub fn normalize_to_nose(frame: &[Point]) -> AlignedFrame {
    let n = frame[NOSE_TIP];
    AlignedFrame {
        points: frame.iter().map(|p| [p[0] - n[0], p[1] - n[1]]).collect(),
        provenance: Provenance::NoseNormalized,
    }
}

/// L2 norm of the difference between two nose-normalized frames.
pub fn frame_deviation(a: &[Point], b: &[Point]) -> f64 {
    let na = a[NOSE_TIP];
    let nb = b[NOSE_TIP];
    sqrt(
        a.iter()
            .zip(b)
            .map(|(p, q)| {
                let dx = (p[0] - na[0]) - (q[0] - nb[0]);
                let dy = (p[1] - na[1]) - (q[1] - nb[1]);
                dx * dx + dy * dy
            })
            .sum(),
    )
}

/// Index `k >= 1` whose nose-normalized frame deviates most from frame 0.
/// Ties go to the smallest index.
pub fn select_peak_frame(seq: &LandmarkSequence) -> usize {
    let neutral = &seq.frames[0];
    let mut best = 1;
    let mut best_dev = f64::NEG_INFINITY;
    for (k, f) in seq.frames.iter().enumerate().skip(1) {
        let d = frame_deviation(f, neutral);
        if d > best_dev {
            best = k;
            best_dev = d;
        }
    }
    best
}
