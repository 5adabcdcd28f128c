//! Dataset model and deterministic synthetic surrogates for the gaze and
//! facial-expression tasks.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{exp, sin};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive, normal, SeededRng};

/// Channels every recording must carry.
pub const REQUIRED_CHANNELS: [&str; 4] = ["AF3", "F7", "F8", "AF4"];
pub const NUM_LANDMARKS: usize = 68;
/// Index of the nose tip in the 68-point scheme (0-based).
pub const NOSE_TIP: usize = 30;
pub const GAZE_SAMPLE_RATE: f64 = 128.0;
/// Samples in one 5 s gaze window.
pub const GAZE_WINDOW: usize = 640;
pub const FACE_FPS: f64 = 30.0;

pub type Point = [f64; 2];
/// One frame of 68 landmarks.
pub type Frame = Vec<Point>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EegRecording {
    pub sample_rate_hz: f64,
    /// Channel name and samples, in file order.
    pub channels: Vec<(String, Vec<f64>)>,
    pub start_time: Option<f64>,
    /// Per-sample timestamps as read from the `t` column, if any.
    pub times: Option<Vec<f64>>,
}

impl EegRecording {
    pub fn from_channels(sample_rate_hz: f64, channels: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let rec = Self {
            sample_rate_hz,
            channels,
            start_time: None,
            times: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        if times.len() != self.len() {
            return Err(Error::Format(format!(
                "{} timestamps for {} samples",
                times.len(),
                self.len()
            )));
        }
        self.start_time = times.first().copied();
        self.times = Some(times);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(param("sample rate must be positive"));
        }
        for req in REQUIRED_CHANNELS {
            if self.channel(req).is_none() {
                return Err(Error::Format(format!("missing required channel {req}")));
            }
        }
        let n = self.channels[0].1.len();
        if n < 2 {
            return Err(Error::Format("recording needs at least 2 samples".into()));
        }
        for (name, series) in &self.channels {
            if series.len() != n {
                return Err(Error::Format(format!(
                    "channel {name} has {} samples, expected {n}",
                    series.len()
                )));
            }
            if let Some(t) = series.iter().position(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "channel {name} has a non-finite sample at index {t}"
                )));
            }
        }
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_slice())
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.channels
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |(_, s)| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSequence {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

pub fn validate_frame(frame: &[Point]) -> Result<()> {
    if frame.len() != NUM_LANDMARKS {
        return Err(Error::Format(format!(
            "frame has {} points, expected {NUM_LANDMARKS}",
            frame.len()
        )));
    }
    if frame.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite landmark coordinate".into()));
    }
    Ok(())
}

impl LandmarkSequence {
    pub fn new(fps: f64, frames: Vec<Frame>) -> Result<Self> {
        let seq = Self { fps, frames };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(param("frame rate must be positive"));
        }
        if self.frames.len() < 2 {
            return Err(Error::Format(
                "landmark sequence needs at least 2 frames".into(),
            ));
        }
        self.frames.iter().try_for_each(|f| validate_frame(f))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Gaze9,
    /// One of the four binary autobiographical-memory pairs (ids 1 to 4).
    SemPair(u8),
    CkEmotion7,
}

impl TaskKind {
    pub fn class_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            TaskKind::Gaze9 => &[
                "top_left",
                "top",
                "top_right",
                "left",
                "center",
                "right",
                "bottom_left",
                "bottom",
                "bottom_right",
            ],
            TaskKind::SemPair(1) => &["famous_faces", "unknown_faces"],
            TaskKind::SemPair(2) => &["distant_past_family", "recent_past_family"],
            TaskKind::SemPair(3) => &["distant_past_group", "recent_past_group"],
            TaskKind::SemPair(_) => &["famous_places", "unknown_places"],
            TaskKind::CkEmotion7 => &[
                "anger", "contempt", "disgust", "fear", "happy", "sadness", "surprise",
            ],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn name(self) -> String {
        match self {
            TaskKind::Gaze9 => "gaze9".into(),
            TaskKind::SemPair(id) => format!("sem_pair{id}"),
            TaskKind::CkEmotion7 => "ck_emotion7".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaze9" => Ok(TaskKind::Gaze9),
            "ck_emotion7" | "ck7" => Ok(TaskKind::CkEmotion7),
            _ => {
                let id = s
                    .strip_prefix("sem_pair")
                    .map(|r| r.trim_start_matches(['_', ':']))
                    .and_then(|r| r.parse::<u8>().ok())
                    .ok_or_else(|| param(format!("unknown task `{s}`")))?;
                if (1..=4).contains(&id) {
                    Ok(TaskKind::SemPair(id))
                } else {
                    Err(param(format!("class-pair id must be 1..=4, got {id}")))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub subject_id: String,
    /// Index into the dataset's class list.
    pub label: usize,
    pub eeg: Option<EegRecording>,
    pub landmarks: Option<LandmarkSequence>,
    /// Grayscale intensities, row-major.
    pub image: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub task_kind: TaskKind,
    pub class_names: Vec<String>,
    pub instances: Vec<LabeledInstance>,
}

impl Dataset {
    pub fn new(
        task_kind: TaskKind,
        class_names: Vec<String>,
        instances: Vec<LabeledInstance>,
    ) -> Result<Self> {
        let ds = Self {
            task_kind,
            class_names,
            instances,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.is_empty() {
            return Err(Error::Format("dataset declares no classes".into()));
        }
        for (n, inst) in self.instances.iter().enumerate() {
            if inst.subject_id.is_empty() {
                return Err(Error::Format(format!("instance {n} has no subject id")));
            }
            if inst.label >= self.class_names.len() {
                return Err(Error::Format(format!(
                    "instance {n} has label {} outside the {} declared classes",
                    inst.label,
                    self.class_names.len()
                )));
            }
            if inst.eeg.is_none() && inst.landmarks.is_none() && inst.image.is_none() {
                return Err(Error::Format(format!("instance {n} carries no modality")));
            }
            if let Some(e) = &inst.eeg {
                e.validate()?;
            }
            if let Some(l) = &inst.landmarks {
                l.validate()?;
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.label).collect()
    }

    /// Distinct subject ids in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for inst in &self.instances {
            if !out.contains(&inst.subject_id) {
                out.push(inst.subject_id.clone());
            }
        }
        out
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// The neutral 68-point face used by the expression generator, in pixel
/// units on a 200x200 frame. Exactly mirror-symmetric about `x = 100`.
pub fn mean_face() -> Frame {
    include_str!("../assets/mean_face.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            [it.next().unwrap(), it.next().unwrap()]
        })
        .collect()
}

fn subject_name(s: usize) -> String {
    format!("s{:02}", s + 1)
}

/// Per-class, per-channel sinusoid `(frequency Hz, phase rad)`.
///
/// Every class uses the same frequencies on each channel; classes differ in
/// how the phases line up across channels, so class identity lives in the
/// inter-channel relationship rather than in any single channel's spectrum.
pub fn gaze_signature(class: usize) -> [(f64, f64); 4] {
    const FREQS: [f64; 4] = [6.0, 9.5, 12.0, 15.5];
    let mut out = [(0.0, 0.0); 4];
    for (ch, slot) in out.iter_mut().enumerate() {
        let step = ((class * (ch + 1) + 2 * ch) % 9) as f64;
        *slot = (FREQS[ch], 2.0 * PI * step / 9.0);
    }
    out
}

/// Synthetic 9-class gaze EEG.
///
/// Each instance is a 640-sample, 128 Hz window over `AF3, F7, F8, AF4`
/// holding the class sinusoids at unit amplitude, a per-subject DC offset
/// and per-subject gain, and white noise of standard deviation `1 / snr`.
pub fn synth_gaze_dataset(
    seed: u64,
    n_subjects: usize,
    reps_per_class: usize,
    snr: f64,
) -> Result<Dataset> {
    if n_subjects < 2 {
        return Err(param("need at least 2 subjects"));
    }
    if reps_per_class < 1 {
        return Err(param("need at least 1 repetition per class"));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(param("snr must be positive"));
    }
    let task = TaskKind::Gaze9;
    let noise = 1.0 / snr;
    let mut instances = Vec::with_capacity(9 * reps_per_class * n_subjects);
    for s in 0..n_subjects {
        let mut srng = derive(seed, 2 * s as u64);
        let offsets: Vec<f64> = (0..4).map(|_| 20.0 * normal(&mut srng)).collect();
        let gains: Vec<f64> = (0..4).map(|_| srng.gen_range(0.8..1.25)).collect();
        let mut rng = derive(seed, 2 * s as u64 + 1);
        for class in 0..9 {
            let sig = gaze_signature(class);
            for _ in 0..reps_per_class {
                let channels = REQUIRED_CHANNELS
                    .iter()
                    .enumerate()
                    .map(|(ch, name)| {
                        let (f, ph) = sig[ch];
                        let series = (0..GAZE_WINDOW)
                            .map(|t| {
                                let tt = t as f64 / GAZE_SAMPLE_RATE;
                                offsets[ch]
                                    + gains[ch] * sin(2.0 * PI * f * tt + ph)
                                    + noise * normal(&mut rng)
                            })
                            .collect();
                        (name.to_string(), series)
                    })
                    .collect();
                let rec = EegRecording::from_channels(GAZE_SAMPLE_RATE, channels)?;
                let times = (0..GAZE_WINDOW)
                    .map(|t| t as f64 / GAZE_SAMPLE_RATE)
                    .collect();
                instances.push(LabeledInstance {
                    subject_id: subject_name(s),
                    label: class,
                    eeg: Some(rec.with_times(times)?),
                    landmarks: None,
                    image: None,
                });
            }
        }
    }
    Dataset::new(task, task.class_names(), instances)
}

/// Frames per synthetic expression clip.
pub const EXPRESSION_FRAMES: usize = 20;

/// Displacement scale used when none is given.
pub const DEFAULT_DISPLACEMENT_SCALE: f64 = 1.0;

/// Landmark groups moved together by expression fields.
const REGIONS: [&[usize]; 8] = [
    &[17, 18, 19, 20, 21, 22, 23, 24, 25, 26],
    &[36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47],
    &[48, 54, 60, 64],
    &[49, 50, 51, 52, 53, 61, 62, 63],
    &[55, 56, 57, 58, 59, 65, 66, 67],
    &[5, 6, 7, 8, 9, 10, 11],
    &[31, 32, 33, 34, 35],
    &[19, 20, 21, 22, 23, 24],
];

/// Class displacement fields, mirror-symmetric, in pixels at scale 1.
fn expression_fields(seed: u64, n_classes: usize) -> Vec<Frame> {
    let mut rng = derive(seed, u64::MAX);
    let base = mean_face();
    (0..n_classes)
        .map(|_| {
            let mut field = vec![[0.0, 0.0]; NUM_LANDMARKS];
            for region in REGIONS {
                let dx = 4.0 * normal(&mut rng);
                let dy = 4.0 * normal(&mut rng);
                for &p in region {
                    // Horizontal motion points away from the midline on both
                    // sides so the field stays mirror-symmetric.
                    let side = if base[p][0] < 100.0 {
                        -1.0
                    } else if base[p][0] > 100.0 {
                        1.0
                    } else {
                        0.0
                    };
                    field[p][0] += side * dx;
                    field[p][1] += dy;
                }
            }
            field[NOSE_TIP] = [0.0, 0.0];
            field
        })
        .collect()
}

/// Onset, apex, offset: zero at frame 0, peak two thirds of the way in.
fn expression_envelope(t: usize) -> f64 {
    if t == 0 {
        return 0.0;
    }
    let x = t as f64 / (EXPRESSION_FRAMES - 1) as f64;
    let z = (x - 0.66) / 0.2;
    exp(-0.5 * z * z)
}

/// Synthetic expression landmarks for the first binary class pair.
pub fn synth_expression_dataset(
    seed: u64,
    n_subjects: usize,
    reps_per_class: usize,
    displacement_scale: f64,
) -> Result<Dataset> {
    synth_expression_task(
        TaskKind::SemPair(1),
        seed,
        n_subjects,
        reps_per_class,
        displacement_scale,
    )
}

/// Synthetic expression landmarks for any landmark task.
///
/// Frame 0 is the subject's neutral face; later frames add the class field
/// times an onset/apex/offset envelope, per-instance gain, and per-frame
/// jitter proportional to `displacement_scale`. Each clip is translated by
/// a random constant offset.
pub fn synth_expression_task(
    task: TaskKind,
    seed: u64,
    n_subjects: usize,
    reps_per_class: usize,
    displacement_scale: f64,
) -> Result<Dataset> {
    if n_subjects < 2 {
        return Err(param("need at least 2 subjects"));
    }
    if reps_per_class < 1 {
        return Err(param("need at least 1 repetition per class"));
    }
    if !(displacement_scale >= 0.0 && displacement_scale.is_finite()) {
        return Err(param("displacement scale must be non-negative"));
    }
    if task == TaskKind::Gaze9 {
        return Err(param("gaze is an EEG task"));
    }
    let classes = task.class_names();
    let fields = expression_fields(seed, classes.len());
    let base = mean_face();
    let mut instances = Vec::new();
    for s in 0..n_subjects {
        let mut srng = derive(seed, 2 * s as u64);
        let face: Frame = base
            .iter()
            .map(|p| {
                [
                    p[0] + 1.5 * normal(&mut srng),
                    p[1] + 1.5 * normal(&mut srng),
                ]
            })
            .collect();
        let expressiveness = srng.gen_range(0.8..1.2);
        let mut rng = derive(seed, 2 * s as u64 + 1);
        for (class, field) in fields.iter().enumerate() {
            for _ in 0..reps_per_class {
                let frames = expression_clip(
                    &face,
                    field,
                    expressiveness * rng.gen_range(0.85..1.15),
                    displacement_scale,
                    &mut rng,
                );
                instances.push(LabeledInstance {
                    subject_id: subject_name(s),
                    label: class,
                    eeg: None,
                    landmarks: Some(LandmarkSequence::new(FACE_FPS, frames)?),
                    image: None,
                });
            }
        }
    }
    Dataset::new(task, classes, instances)
}

fn expression_clip(
    face: &[Point],
    field: &[Point],
    gain: f64,
    scale: f64,
    rng: &mut SeededRng,
) -> Vec<Frame> {
    let shift = [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)];
    (0..EXPRESSION_FRAMES)
        .map(|t| {
            let env = expression_envelope(t) * gain * scale;
            let jitter = if t == 0 { 0.0 } else { 0.3 * scale };
            face.iter()
                .zip(field)
                .map(|(p, d)| {
                    [
                        p[0] + shift[0] + env * d[0] + jitter * normal(rng),
                        p[1] + shift[1] + env * d[1] + jitter * normal(rng),
                    ]
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_face_is_mirror_symmetric() {
        let f = mean_face();
        assert_eq!(f.len(), NUM_LANDMARKS);
        validate_frame(&f).unwrap();
        // Each point's mirror image is another landmark.
        for p in &f {
            let m = [200.0 - p[0], p[1]];
            assert!(f.iter().any(|q| q == &m), "{p:?}");
        }
        assert_eq!(f[NOSE_TIP][0], 100.0);
    }

    #[test]
    fn gaze_counts_and_invariants() {
        let ds = synth_gaze_dataset(1, 9, 5, 10.0).unwrap();
        assert_eq!(ds.instances.len(), 405);
        assert_eq!(ds.n_classes(), 9);
        assert_eq!(ds.subjects().len(), 9);
        for inst in &ds.instances {
            let e = inst.eeg.as_ref().unwrap();
            assert_eq!(e.len(), GAZE_WINDOW);
            e.validate().unwrap();
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(
            synth_gaze_dataset(4, 2, 1, 3.0).unwrap(),
            synth_gaze_dataset(4, 2, 1, 3.0).unwrap()
        );
        assert_ne!(
            synth_gaze_dataset(4, 2, 1, 3.0).unwrap(),
            synth_gaze_dataset(5, 2, 1, 3.0).unwrap()
        );
        assert_eq!(
            synth_expression_dataset(4, 2, 2, 1.0).unwrap(),
            synth_expression_dataset(4, 2, 2, 1.0).unwrap()
        );
    }

    #[test]
    fn expression_counts() {
        let ds = synth_expression_dataset(1, 9, 10, 1.0).unwrap();
        assert_eq!(ds.instances.len(), 180);
        let ones = ds.instances.iter().filter(|i| i.label == 1).count();
        assert_eq!(ones, 90);
        let ck = synth_expression_task(TaskKind::CkEmotion7, 1, 2, 1, 1.0).unwrap();
        assert_eq!(ck.instances.len(), 14);
    }

    #[test]
    fn zero_scale_frames_are_identical() {
        let ds = synth_expression_dataset(3, 2, 1, 0.0).unwrap();
        for inst in &ds.instances {
            let seq = inst.landmarks.as_ref().unwrap();
            assert!(seq.frames.iter().all(|f| f == &seq.frames[0]));
        }
    }

    #[test]
    fn preconditions() {
        assert!(synth_gaze_dataset(1, 1, 1, 1.0).is_err());
        assert!(synth_gaze_dataset(1, 2, 0, 1.0).is_err());
        assert!(synth_gaze_dataset(1, 2, 1, 0.0).is_err());
        assert!(synth_expression_dataset(1, 2, 1, -1.0).is_err());
    }

    #[test]
    fn recording_validation() {
        let ok = |n: usize| {
            REQUIRED_CHANNELS
                .iter()
                .map(|c| (c.to_string(), vec![0.0; n]))
                .collect::<Vec<_>>()
        };
        assert!(EegRecording::from_channels(128.0, ok(3)).is_ok());
        assert!(EegRecording::from_channels(128.0, ok(1)).is_err());
        let mut missing = ok(3);
        missing.remove(2);
        match EegRecording::from_channels(128.0, missing) {
            Err(Error::Format(m)) => assert!(m.contains("F8")),
            other => panic!("{other:?}"),
        }
        let mut ragged = ok(3);
        ragged[1].1.push(1.0);
        assert!(EegRecording::from_channels(128.0, ragged).is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in [
            TaskKind::Gaze9,
            TaskKind::CkEmotion7,
            TaskKind::SemPair(1),
            TaskKind::SemPair(4),
        ] {
            assert_eq!(TaskKind::parse(&t.name()).unwrap(), t);
        }
        assert!(TaskKind::parse("sem_pair5").is_err());
    }
}
