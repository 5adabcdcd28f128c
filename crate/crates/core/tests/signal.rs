use affectkit_core::dataio::*;
use affectkit_core::features::*;
use affectkit_core::linalg::Matrix;
use affectkit_core::preprocess::*;
use affectkit_core::rng::{normal, seeded};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn sine(freq: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
    (0..n)
        .map(|t| amp * (2.0 * PI * freq * t as f64 / rate).sin())
        .collect()
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn params(alpha: f64) -> MagnificationParams {
    MagnificationParams {
        alpha,
        band_lo_hz: 0.5,
        band_hi_hz: 3.0,
        sample_rate_hz: 30.0,
    }
}

#[test]
fn magnification_gain() {
    for alpha in [1.0, 5.0, 10.0] {
        let p = params(alpha);
        let inband = sine(1.0, 30.0, 300, 2.0);
        let out = magnify_motion(&inband, &p).unwrap();
        let gain = peak(&out) / peak(&inband);
        assert!(
            (gain / (1.0 + alpha) - 1.0).abs() < 0.05,
            "alpha {alpha}: gain {gain}"
        );

        let outband = sine(6.0, 30.0, 300, 2.0);
        let out = magnify_motion(&outband, &p).unwrap();
        assert!((peak(&out) / peak(&outband) - 1.0).abs() < 0.01);

        let dc = vec![3.5; 64];
        let out = magnify_motion(&dc, &p).unwrap();
        assert!(out.iter().all(|v| (v - 3.5).abs() < 1e-9 * 3.5));
    }
}

#[test]
fn magnification_rejects_bad_band() {
    let mut p = params(1.0);
    p.band_hi_hz = 15.0;
    assert!(magnify_motion(&[0.0; 16], &p).is_err());
    assert!(magnify_motion(&[0.0; 7], &params(1.0)).is_err());
}

#[test]
fn normalization_examples() {
    assert_eq!(
        normalize_channel(&[1.0, 2.0, 3.0]).unwrap(),
        vec![-1.0, 0.0, 1.0]
    );
    assert!(normalize_channel(&[5.0, 5.0, 5.0]).is_err());
}

#[test]
fn median_examples() {
    assert_eq!(
        median_filter(&[1.0, 9.0, 1.0, 9.0, 1.0], 3).unwrap(),
        vec![1.0, 1.0, 9.0, 1.0, 1.0]
    );
    assert_eq!(
        median_filter(&[0.0, 0.0, 100.0, 0.0, 0.0], 3).unwrap(),
        vec![0.0; 5]
    );
    assert_eq!(
        median_filter(&[3.0, 1.0, 2.0], 1).unwrap(),
        vec![3.0, 1.0, 2.0]
    );
    assert!(median_filter(&[1.0, 2.0, 3.0, 4.0], 2).is_err());
}

fn random_frame(seed: u64) -> Vec<Point> {
    let mut rng = seeded(seed);
    mean_face()
        .iter()
        .map(|p| [p[0] + 3.0 * normal(&mut rng), p[1] + 3.0 * normal(&mut rng)])
        .collect()
}

#[test]
fn affine_fit_is_optimal() {
    for seed in 0..5 {
        let frame = random_frame(seed);
        let template = random_frame(seed + 100);
        let best = fit_affine(&frame, &template).unwrap();
        let r = affine_residual(&best, &frame, &template);
        let mut rng = seeded(seed + 200);
        for _ in 0..100 {
            let mut m = best;
            for v in m.a.iter_mut().flatten() {
                *v += 0.05 * normal(&mut rng);
            }
            for v in m.b.iter_mut() {
                *v += rng.gen_range(-2.0..2.0);
            }
            assert!(r <= affine_residual(&m, &frame, &template));
        }
    }
}

#[test]
fn affine_recovers_rigid_motion() {
    let template = mean_face();
    let (c, s) = (PI / 6.0, PI / 6.0);
    let (c, s) = (c.cos(), s.sin());
    let frame: Vec<Point> = template
        .iter()
        .map(|p| [c * p[0] - s * p[1] + 12.0, s * p[0] + c * p[1] - 7.0])
        .collect();
    let map = fit_affine(&frame, &template).unwrap();
    assert!(affine_residual(&map, &frame, &template) < 1e-9);
    let aligned = align_landmarks_affine(&frame, &template).unwrap();
    assert_eq!(aligned.provenance, Provenance::Affine);
    let collinear: Vec<Point> = (0..68).map(|i| [i as f64, 2.0 * i as f64]).collect();
    assert!(align_landmarks_affine(&frame, &collinear).is_err());
}

fn seq_with_peak(peak_at: usize, n: usize) -> LandmarkSequence {
    let base = mean_face();
    let frames = (0..n)
        .map(|k| {
            let amp = if k == peak_at { 5.0 } else { (k % 3) as f64 };
            base.iter()
                .enumerate()
                .map(|(i, p)| {
                    if i == 48 {
                        [p[0] - amp, p[1] + amp]
                    } else {
                        *p
                    }
                })
                .collect()
        })
        .collect();
    LandmarkSequence::new(30.0, frames).unwrap()
}

#[test]
fn peak_frame_matches_brute_force() {
    let seq = seq_with_peak(5, 12);
    let n0 = normalize_to_nose(&seq.frames[0]).points;
    let brute = (1..seq.len())
        .max_by(|&a, &b| {
            let da = frame_deviation(&normalize_to_nose(&seq.frames[a]).points, &n0);
            let db = frame_deviation(&normalize_to_nose(&seq.frames[b]).points, &n0);
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .unwrap();
    assert_eq!(brute, 5);
    assert_eq!(select_peak_frame(&seq), 5);
    let flat = LandmarkSequence::new(30.0, vec![mean_face(); 4]).unwrap();
    assert_eq!(select_peak_frame(&flat), 1);
}

#[test]
fn nose_normalization() {
    let mut f = mean_face();
    let nose = f[NOSE_TIP];
    let g = normalize_to_nose(&f);
    assert_eq!(g.points[NOSE_TIP], [0.0, 0.0]);
    assert_eq!(g.provenance, Provenance::NoseNormalized);
    assert_eq!(normalize_to_nose(&g.points).points, g.points);
    f.iter_mut().for_each(|p| *p = [p[0] + 4.0, p[1] - 9.0]);
    let h = normalize_to_nose(&f);
    for (a, b) in h.points.iter().zip(&g.points) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
    assert_eq!(nose, [100.0, 78.0]);
}

#[test]
fn dtnnp_examples() {
    let f = mean_face();
    let mut g = f.clone();
    g[10] = [g[10][0] + 3.0, g[10][1] + 4.0];
    let seq = LandmarkSequence::new(30.0, vec![f.clone(), g]).unwrap();
    let v = dtnnp(&seq);
    assert_eq!(v.len(), 68);
    assert_eq!(v.tag, FeatureTag::D);
    for (i, x) in v.values.iter().enumerate() {
        assert!((x - if i == 10 { 5.0 } else { 0.0 }).abs() < 1e-12);
    }
}

#[test]
fn phog_step_edge_and_uniform() {
    let flat = Matrix::zeros(120, 120);
    assert!(phog(&flat).unwrap().values.iter().all(|&v| v == 0.0));
    let mut step = Matrix::zeros(120, 120);
    for r in 0..120 {
        for c in 60..120 {
            step.row_mut(r)[c] = 1.0;
        }
    }
    let h = phog(&step).unwrap();
    assert_eq!(h.len(), PHOG_LEN);
    let level0 = &h.values[..PHOG_BINS];
    let total: f64 = level0.iter().sum();
    assert!(level0[0] / total >= 0.9, "{level0:?}");
    assert!(phog(&Matrix::zeros(100, 120)).is_err());
}

#[test]
fn raster_is_translation_invariant_and_discriminative() {
    let f = mean_face();
    let g: Vec<Point> = f.iter().map(|p| [p[0] + 33.0, p[1] - 12.0]).collect();
    let a = rasterize_landmarks(&f).unwrap();
    assert!(a.as_slice().iter().any(|&v| v > 0.0));
    assert_eq!(a, rasterize_landmarks(&g).unwrap());
    let mut h = f.clone();
    for p in h.iter_mut().skip(48) {
        p[1] += 6.0;
    }
    let b = rasterize_landmarks(&h).unwrap();
    let l2: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    assert!(l2 > 0.0);
}

#[test]
fn assemble_examples() {
    let d = FeatureVector::new(vec![1.0; 68], FeatureTag::D).unwrap();
    let o = FeatureVector::new(vec![2.0; 10], FeatureTag::Origami).unwrap();
    let ab = assemble(&[d.clone(), o.clone()]).unwrap();
    assert_eq!(ab.len(), 78);
    assert_eq!(ab.tag, FeatureTag::Mixed);
    assert_ne!(ab, assemble(&[o, d.clone()]).unwrap());
    assert_eq!(assemble(&[d.clone()]).unwrap(), d);
    assert!(assemble(&[]).is_err());
    assert!(FeatureVector::new(vec![f64::NAN], FeatureTag::D).is_err());
}

#[test]
fn synthetic_datasets() {
    let g = synth_gaze_dataset(1, 9, 5, 10.0).unwrap();
    assert_eq!(g.instances.len(), 405);
    assert_eq!(g.n_classes(), 9);
    assert_eq!(g, synth_gaze_dataset(1, 9, 5, 10.0).unwrap());
    let e = g.instances[0].eeg.as_ref().unwrap();
    assert_eq!(e.len(), GAZE_WINDOW);
    for name in REQUIRED_CHANNELS {
        assert!(e.channel(name).is_some());
    }

    let x = synth_expression_dataset(2, 9, 10, 1.0).unwrap();
    assert_eq!(x.instances.len(), 180);
    assert_eq!(x.labels().iter().filter(|&&l| l == 0).count(), 90);
    x.validate().unwrap();

    let still = synth_expression_dataset(2, 3, 2, 0.0).unwrap();
    for inst in &still.instances {
        assert!(dtnnp(inst.landmarks.as_ref().unwrap())
            .values
            .iter()
            .all(|&v| v == 0.0));
    }
    assert!(synth_gaze_dataset(1, 1, 5, 10.0).is_err());
    assert!(synth_gaze_dataset(1, 2, 0, 10.0).is_err());
    assert!(synth_gaze_dataset(1, 2, 1, 0.0).is_err());
}

proptest! {
    #[test]
    fn normalized_channel_moments(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
        let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        let y = normalize_channel(&xs).unwrap();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn median_values_come_from_input(xs in prop::collection::vec(-100.0f64..100.0, 1..60), half in 0usize..5) {
        let w = (2 * half + 1).min(if xs.len() % 2 == 1 { xs.len() } else { xs.len() - 1 });
        let y = median_filter(&xs, w).unwrap();
        prop_assert_eq!(y.len(), xs.len());
        for v in y {
            prop_assert!(xs.contains(&v));
        }
    }

    #[test]
    fn magnification_is_linear(a in prop::collection::vec(-5.0f64..5.0, 32), b in prop::collection::vec(-5.0f64..5.0, 32), s in -3.0f64..3.0) {
        let p = params(4.0);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let (ma, mb, mm) = (magnify_motion(&a, &p).unwrap(), magnify_motion(&b, &p).unwrap(), magnify_motion(&mix, &p).unwrap());
        for i in 0..32 {
            prop_assert!((mm[i] - (ma[i] + s * mb[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_frame_translation_invariant(seed in 0u64..1000, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let mut rng = seeded(seed);
        let base = mean_face();
        let frames: Vec<Vec<Point>> = (0..6).map(|_| base.iter().map(|p| [p[0] + normal(&mut rng), p[1] + normal(&mut rng)]).collect()).collect();
        let moved: Vec<Vec<Point>> = frames.iter().map(|f| f.iter().map(|p| [p[0] + dx, p[1] + dy]).collect()).collect();
        let a = LandmarkSequence::new(30.0, frames).unwrap();
        let b = LandmarkSequence::new(30.0, moved).unwrap();
        prop_assert_eq!(select_peak_frame(&a), select_peak_frame(&b));
        for v in dtnnp(&a).values {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn phog_levels_are_l1_normalized(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let img = Matrix::from_vec(120, 120, (0..14400).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let h = phog(&img).unwrap();
        let mut off = 0;
        for cells in [1, 4, 16] {
            let s: f64 = h.values[off..off + 8 * cells].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9 || s == 0.0);
            off += 8 * cells;
        }
    }

    #[test]
    fn assemble_preserves_positions(a in prop::collection::vec(-1.0f64..1.0, 1..10), b in prop::collection::vec(-1.0f64..1.0, 1..10)) {
        let v = assemble(&[FeatureVector::new(a.clone(), FeatureTag::H).unwrap(), FeatureVector::new(b.clone(), FeatureTag::D).unwrap()]).unwrap();
        prop_assert_eq!(v.len(), a.len() + b.len());
        prop_assert_eq!(&v.values[..a.len()], &a[..]);
        prop_assert_eq!(&v.values[a.len()..], &b[..]);
    }
}
