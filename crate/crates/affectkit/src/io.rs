//! Readers and writers for EEG CSV, landmark JSON lines, grayscale images
//! and dataset manifests.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use affectkit_core::dataio::{
    Dataset, EegRecording, Frame, LabeledInstance, LandmarkSequence, TaskKind, FACE_FPS,
    GAZE_SAMPLE_RATE, NUM_LANDMARKS, REQUIRED_CHANNELS,
};
use affectkit_core::linalg::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{format_err, io_err, Error, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

// ------------------------------------------------------------------ EEG

fn is_time_column(name: &str) -> bool {
    name.eq_ignore_ascii_case("t") || name.eq_ignore_ascii_case("time")
}

/// Parses EEG CSV text. `path` is only used in error messages.
pub fn read_eeg_csv<R: Read>(reader: R, sample_rate_hz: f64, path: &Path) -> Result<EegRecording> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| format_err(path, format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    for required in REQUIRED_CHANNELS {
        if !header.iter().any(|h| h == required) {
            return Err(format_err(
                path,
                format!("missing required channel `{required}`"),
            ));
        }
    }
    let time_col = header.iter().position(|h| is_time_column(h));
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            row,
            msg: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(format_err(
                path,
                format!(
                    "row {row} has {} fields, header has {}",
                    record.len(),
                    header.len()
                ),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                row,
                msg: format!("`{cell}` in column `{}` is not a number", header[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    row,
                    msg: format!("non-finite value `{cell}` in column `{}`", header[c]),
                });
            }
            columns[c].push(v);
        }
    }
    let mut times = None;
    let mut channels = Vec::new();
    for (c, (name, values)) in header.into_iter().zip(columns).enumerate() {
        if Some(c) == time_col {
            times = Some(values);
        } else {
            channels.push((name, values));
        }
    }
    let rec = EegRecording::from_channels(sample_rate_hz, channels)
        .map_err(|e| format_err(path, e.to_string()))?;
    match times {
        Some(t) => rec
            .with_times(t)
            .map_err(|e| format_err(path, e.to_string())),
        None => Ok(rec),
    }
}

pub fn load_eeg_csv(path: &Path, sample_rate_hz: f64) -> Result<EegRecording> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    read_eeg_csv(f, sample_rate_hz, path)
}

/// CSV text with a leading `t` column; timestamps are synthesized from the
/// sample rate when the recording carries none.
pub fn eeg_csv_string(rec: &EegRecording) -> String {
    let mut s = String::from("t");
    for (name, _) in &rec.channels {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for i in 0..rec.len() {
        let t = match &rec.times {
            Some(t) => t[i],
            None => i as f64 / rec.sample_rate_hz,
        };
        let _ = write!(s, "{t}");
        for (_, v) in &rec.channels {
            let _ = write!(s, ",{}", v[i]);
        }
        s.push('\n');
    }
    s
}

pub fn write_eeg_csv(path: &Path, rec: &EegRecording) -> Result<()> {
    write_atomic(path, eeg_csv_string(rec).as_bytes())
}

// ------------------------------------------------------------ landmarks

#[derive(Serialize, Deserialize)]
struct LandmarkLine {
    frame: usize,
    pts: Vec<[f64; 2]>,
}

/// Parses landmark JSON lines; blank lines are skipped.
pub fn read_landmarks_jsonl(text: &str, fps: f64, path: &Path) -> Result<LandmarkSequence> {
    let mut frames: Vec<(usize, Frame, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LandmarkLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.into(),
            row: lineno,
            msg: e.to_string(),
        })?;
        if rec.pts.len() != NUM_LANDMARKS {
            return Err(Error::Parse {
                path: path.into(),
                row: lineno,
                msg: format!(
                    "frame {} has {} points, expected {NUM_LANDMARKS}",
                    rec.frame,
                    rec.pts.len()
                ),
            });
        }
        if rec.pts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                path: path.into(),
                row: lineno,
                msg: "non-finite coordinate".into(),
            });
        }
        frames.push((rec.frame, rec.pts, lineno));
    }
    frames.sort_by_key(|f| f.0);
    for (expected, (k, _, lineno)) in frames.iter().enumerate() {
        if *k < expected {
            return Err(format_err(
                path,
                format!("duplicate frame index {k} (line {lineno})"),
            ));
        }
        if *k > expected {
            return Err(format_err(path, format!("missing frame index {expected}")));
        }
    }
    let frames = frames.into_iter().map(|(_, f, _)| f).collect();
    LandmarkSequence::new(fps, frames).map_err(|e| format_err(path, e.to_string()))
}

pub fn load_landmarks_jsonl(path: &Path, fps: f64) -> Result<LandmarkSequence> {
    read_landmarks_jsonl(&read_file(path)?, fps, path)
}

pub fn landmarks_jsonl_string(seq: &LandmarkSequence) -> Result<String> {
    let mut s = String::new();
    for (frame, pts) in seq.frames.iter().enumerate() {
        s.push_str(&serde_json::to_string(&LandmarkLine {
            frame,
            pts: pts.clone(),
        })?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_landmarks_jsonl(path: &Path, seq: &LandmarkSequence) -> Result<()> {
    write_atomic(path, landmarks_jsonl_string(seq)?.as_bytes())
}

// --------------------------------------------------------------- images

/// Any image format the decoder knows, as 8-bit luma intensities.
pub fn load_gray_image(path: &Path) -> Result<Matrix> {
    let img = image::open(path)
        .map_err(|e| format_err(path, e.to_string()))?
        .to_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(f64::from).collect();
    Ok(Matrix::from_vec(h as usize, w as usize, data)?)
}

/// PNG, intensities rounded and clamped to `0..=255`.
pub fn write_gray_png(path: &Path, img: &Matrix) -> Result<()> {
    let raw: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.cols() as u32, img.rows() as u32, raw)
        .ok_or_else(|| format_err(path, "image buffer size mismatch"))?;
    let mut bytes = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut bytes, image::ImageFormat::Png)
        .map_err(|e| format_err(path, e.to_string()))?;
    write_atomic(path, bytes.get_ref())
}

// ------------------------------------------------------------- manifest

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject: String,
    pub label: LabelRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eeg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: String,
    pub classes: Vec<String>,
    /// EEG sample rate; 128 Hz when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eeg_rate_hz: Option<f64>,
    /// Landmark frame rate; 30 fps when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub instances: Vec<ManifestEntry>,
}

/// Accepts a manifest file or a directory holding `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

/// Loads a dataset; instance paths are relative to the manifest.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mpath = manifest_path(path);
    let manifest: Manifest =
        serde_json::from_str(&read_file(&mpath)?).map_err(|e| format_err(&mpath, e.to_string()))?;
    let base = mpath.parent().unwrap_or(Path::new("."));
    let task = TaskKind::parse(&manifest.task).map_err(|e| format_err(&mpath, e.to_string()))?;
    let rate = manifest.eeg_rate_hz.unwrap_or(GAZE_SAMPLE_RATE);
    let fps = manifest.fps.unwrap_or(FACE_FPS);
    let mut instances = Vec::with_capacity(manifest.instances.len());
    for (n, e) in manifest.instances.iter().enumerate() {
        let label = match &e.label {
            LabelRef::Index(i) => *i,
            LabelRef::Name(s) => manifest
                .classes
                .iter()
                .position(|c| c == s)
                .ok_or_else(|| format_err(&mpath, format!("instance {n}: unknown class `{s}`")))?,
        };
        let eeg = e
            .eeg
            .as_ref()
            .map(|p| load_eeg_csv(&base.join(p), rate))
            .transpose()?;
        let landmarks = e
            .landmarks
            .as_ref()
            .map(|p| load_landmarks_jsonl(&base.join(p), fps))
            .transpose()?;
        let image = e
            .image
            .as_ref()
            .map(|p| load_gray_image(&base.join(p)))
            .transpose()?;
        instances.push(LabeledInstance {
            subject_id: e.subject.clone(),
            label,
            eeg,
            landmarks,
            image,
        });
    }
    Dataset::new(task, manifest.classes, instances).map_err(|e| format_err(&mpath, e.to_string()))
}

/// Writes every modality under `dir` plus `manifest.json`.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<Manifest> {
    let mut entries = Vec::with_capacity(ds.instances.len());
    let mut rate = None;
    let mut fps = None;
    for (n, inst) in ds.instances.iter().enumerate() {
        let stem = format!("{}_{n:04}", inst.subject_id);
        let mut entry = ManifestEntry {
            subject: inst.subject_id.clone(),
            label: LabelRef::Name(ds.class_names[inst.label].clone()),
            eeg: None,
            landmarks: None,
            image: None,
        };
        if let Some(rec) = &inst.eeg {
            let rel = format!("eeg/{stem}.csv");
            write_eeg_csv(&dir.join(&rel), rec)?;
            rate.get_or_insert(rec.sample_rate_hz);
            entry.eeg = Some(rel);
        }
        if let Some(seq) = &inst.landmarks {
            let rel = format!("landmarks/{stem}.jsonl");
            write_landmarks_jsonl(&dir.join(&rel), seq)?;
            fps.get_or_insert(seq.fps);
            entry.landmarks = Some(rel);
        }
        if let Some(img) = &inst.image {
            let rel = format!("images/{stem}.png");
            write_gray_png(&dir.join(&rel), img)?;
            entry.image = Some(rel);
        }
        entries.push(entry);
    }
    let manifest = Manifest {
        task: ds.task_kind.name(),
        classes: ds.class_names.clone(),
        eeg_rate_hz: rate,
        fps,
        instances: entries,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}
