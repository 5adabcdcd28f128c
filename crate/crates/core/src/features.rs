//! Landmark displacement and gradient-histogram descriptors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{atan2, floor, sqrt};
use serde::{Deserialize, Serialize};

use crate::dataio::{LandmarkSequence, Point, NUM_LANDMARKS};
use crate::error::{param, Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::{normalize_to_nose, select_peak_frame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureTag {
    /// pHOG of the raster.
    H,
    /// pHOG of the magnified raster.
    HMag,
    /// Distance to nose, neutral vs peak.
    D,
    /// DTNnp of the magnified sequence.
    DMag,
    /// Origami node/edge encodings.
    Origami,
    /// Quaternion PCA projections.
    Q,
    /// Flattened raw EEG window.
    Eeg,
    Mixed,
}

impl FeatureTag {
    pub fn short(self) -> &'static str {
        match self {
            FeatureTag::H => "h",
            FeatureTag::HMag => "h_m",
            FeatureTag::D => "d",
            FeatureTag::DMag => "d_m",
            FeatureTag::Origami => "ne",
            FeatureTag::Q => "q",
            FeatureTag::Eeg => "v",
            FeatureTag::Mixed => "mixed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub tag: FeatureTag,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, tag: FeatureTag) -> Result<Self> {
        if values.is_empty() {
            return Err(param("feature vector is empty"));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite feature at position {p}")));
        }
        Ok(Self { values, tag })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-landmark distance between the nose-normalized peak frame and the
/// nose-normalized neutral frame.
pub fn dtnnp(seq: &LandmarkSequence) -> FeatureVector {
    let peak = select_peak_frame(seq);
    let neutral = normalize_to_nose(&seq.frames[0]).points;
    let apex = normalize_to_nose(&seq.frames[peak]).points;
    let values = apex
        .iter()
        .zip(&neutral)
        .map(|(p, q)| {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            sqrt(dx * dx + dy * dy)
        })
        .collect();
    FeatureVector {
        values,
        tag: FeatureTag::D,
    }
}

pub const PHOG_SIZE: usize = 120;
pub const PHOG_BINS: usize = 8;
pub const PHOG_LEVELS: usize = 3;
/// `8 * (1 + 4 + 16)`.
pub const PHOG_LEN: usize = 168;

/// Pyramid histogram of oriented gradients on a 120x120 image.
pub fn phog(image: &Matrix) -> Result<FeatureVector> {
    if image.rows() != PHOG_SIZE || image.cols() != PHOG_SIZE {
        return Err(Error::Dimension {
            expected: PHOG_SIZE * PHOG_SIZE,
            got: image.rows() * image.cols(),
        });
    }
    if image.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite pixel".into()));
    }
    let n = PHOG_SIZE;
    let px = |r: usize, c: usize| image[(r, c)];
    let mut mag = vec![0.0; n * n];
    let mut bin = vec![0usize; n * n];
    for r in 0..n {
        for c in 0..n {
            let gx = (px(r, (c + 1).min(n - 1)) - px(r, c.saturating_sub(1))) / 2.0;
            let gy = (px((r + 1).min(n - 1), c) - px(r.saturating_sub(1), c)) / 2.0;
            let mut ang = atan2(gy, gx);
            if ang < 0.0 {
                ang += PI;
            }
            if ang >= PI {
                ang -= PI;
            }
            mag[r * n + c] = sqrt(gx * gx + gy * gy);
            bin[r * n + c] = (floor(ang / (PI / PHOG_BINS as f64)) as usize).min(PHOG_BINS - 1);
        }
    }
    let mut out = Vec::with_capacity(PHOG_LEN);
    for level in 0..PHOG_LEVELS {
        let cells = 1 << level;
        let size = n / cells;
        let start = out.len();
        for cr in 0..cells {
            for cc in 0..cells {
                let mut hist = [0.0; PHOG_BINS];
                for r in cr * size..(cr + 1) * size {
                    for c in cc * size..(cc + 1) * size {
                        hist[bin[r * n + c]] += mag[r * n + c];
                    }
                }
                out.extend_from_slice(&hist);
            }
        }
        let total: f64 = out[start..].iter().sum();
        if total > 0.0 {
            out[start..].iter_mut().for_each(|v| *v /= total);
        }
    }
    FeatureVector::new(out, FeatureTag::H)
}

/// Landmark chains drawn by [`rasterize_landmarks`]: `(first, last, closed)`.
pub const CHAINS: [(usize, usize, bool); 9] = [
    (0, 16, false),
    (17, 21, false),
    (22, 26, false),
    (27, 30, false),
    (31, 35, false),
    (36, 41, true),
    (42, 47, true),
    (48, 59, true),
    (60, 67, true),
];

fn draw_segment(img: &mut Matrix, a: Point, b: Point) {
    let n = img.rows() as isize;
    let lo_x = (floor(a[0].min(b[0])) as isize - 2).max(0);
    let hi_x = (floor(a[0].max(b[0])) as isize + 2).min(n - 1);
    let lo_y = (floor(a[1].min(b[1])) as isize - 2).max(0);
    let hi_y = (floor(a[1].max(b[1])) as isize + 2).min(n - 1);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let p = [x as f64 - a[0], y as f64 - a[1]];
            let t = if len2 > 0.0 {
                ((p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let ex = p[0] - t * d[0];
            let ey = p[1] - t * d[1];
            let v = (1.0 - sqrt(ex * ex + ey * ey)).max(0.0);
            let cell = &mut img.row_mut(y as usize)[x as usize];
            if v > *cell {
                *cell = v;
            }
        }
    }
}

/// Draws the facial landmark chains as anti-aliased unit-intensity lines on a
/// black 120x120 canvas, fitted to the landmark bounding box with a 10%
/// margin.
pub fn rasterize_landmarks(frame: &[Point]) -> Result<Matrix> {
    crate::dataio::validate_frame(frame)?;
    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in frame {
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let size = PHOG_SIZE as f64;
    let extent = (max[0] - min[0]).max(max[1] - min[1]);
    let scale = if extent > 0.0 {
        0.8 * (size - 1.0) / extent
    } else {
        1.0
    };
    let center = [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0];
    let mid = (size - 1.0) / 2.0;
    let map = |p: Point| {
        [
            (p[0] - center[0]) * scale + mid,
            (p[1] - center[1]) * scale + mid,
        ]
    };
    let mut img = Matrix::zeros(PHOG_SIZE, PHOG_SIZE);
    for (first, last, closed) in CHAINS {
        for a in first..last {
            draw_segment(&mut img, map(frame[a]), map(frame[a + 1]));
        }
        if closed {
            draw_segment(&mut img, map(frame[last]), map(frame[first]));
        }
    }
    Ok(img)
}

/// pHOG of the rasterized peak frame.
pub fn phog_of_sequence(seq: &LandmarkSequence) -> Result<FeatureVector> {
    debug_assert_eq!(seq.frames[0].len(), NUM_LANDMARKS);
    phog(&rasterize_landmarks(&seq.frames[select_peak_frame(seq)])?)
}

/// Concatenation in order, tagged [`FeatureTag::Mixed`]. A single part is
/// returned unchanged.
pub fn assemble(parts: &[FeatureVector]) -> Result<FeatureVector> {
    match parts {
        [] => Err(param("nothing to assemble")),
        [one] => FeatureVector::new(one.values.clone(), one.tag),
        _ => FeatureVector::new(
            parts
                .iter()
                .flat_map(|p| p.values.iter().copied())
                .collect(),
            FeatureTag::Mixed,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{mean_face, NOSE_TIP};

    fn seq(frames: Vec<Vec<Point>>) -> LandmarkSequence {
        LandmarkSequence::new(30.0, frames).unwrap()
    }

    #[test]
    fn dtnnp_examples() {
        let f = mean_face();
        assert!(dtnnp(&seq(vec![f.clone(); 3]))
            .values
            .iter()
            .all(|&v| v == 0.0));
        let mut g = f.clone();
        g[10][0] += 3.0;
        g[10][1] += 4.0;
        let d = dtnnp(&seq(vec![f.clone(), g.clone()]));
        assert_eq!(d.len(), 68);
        for (i, v) in d.values.iter().enumerate() {
            assert_eq!(*v, if i == 10 { 5.0 } else { 0.0 });
        }
        let shift = |fr: &Vec<Point>| fr.iter().map(|p| [p[0] + 8.0, p[1] - 2.0]).collect();
        let d2 = dtnnp(&seq(vec![shift(&f), shift(&g)]));
        assert_eq!(d2, d);
        assert_eq!(d.values[NOSE_TIP], 0.0);
    }

    #[test]
    fn phog_uniform_and_length() {
        let flat = Matrix::from_vec(120, 120, vec![0.7; 14400]).unwrap();
        let h = phog(&flat).unwrap();
        assert_eq!(h.len(), PHOG_LEN);
        assert!(h.values.iter().all(|&v| v == 0.0));
        assert!(phog(&Matrix::zeros(100, 120)).is_err());
    }

    #[test]
    fn phog_vertical_edge() {
        let mut img = Matrix::zeros(120, 120);
        for r in 0..120 {
            for c in 60..120 {
                img.row_mut(r)[c] = 1.0;
            }
        }
        let h = phog(&img).unwrap();
        assert!(h.values[0] >= 0.9);
        for level in [0..8, 8..40, 40..168] {
            let s: f64 = h.values[level].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn raster_is_nonzero_and_translation_invariant() {
        let f = mean_face();
        let a = rasterize_landmarks(&f).unwrap();
        assert!(a.as_slice().iter().any(|&v| v > 0.0));
        let g: Vec<Point> = f.iter().map(|p| [p[0] + 13.0, p[1] - 7.0]).collect();
        let b = rasterize_landmarks(&g).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
        let mut h = f.clone();
        h[57][1] += 15.0;
        let c = rasterize_landmarks(&h).unwrap();
        let l2: f64 = a
            .as_slice()
            .iter()
            .zip(c.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        assert!(l2 > 0.0);
    }

    #[test]
    fn assemble_rules() {
        let a = FeatureVector::new(vec![1.0; 68], FeatureTag::D).unwrap();
        let b = FeatureVector::new(vec![2.0; 10], FeatureTag::Origami).unwrap();
        assert_eq!(assemble(&[a.clone(), b.clone()]).unwrap().len(), 78);
        assert_eq!(assemble(&[a.clone()]).unwrap(), a);
        assert_ne!(
            assemble(&[a.clone(), b.clone()]).unwrap(),
            assemble(&[b, a]).unwrap()
        );
        assert!(assemble(&[]).is_err());
    }
}
