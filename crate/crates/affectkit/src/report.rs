//! Evaluation reports (JSON, CSV, text) and model documents.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use affectkit_core::eval::{ConfusionMatrix, EvalReport};
use affectkit_core::pipeline::{FittedPipeline, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::config::config_pairs;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn config_map(cfg: &PipelineConfig) -> BTreeMap<String, String> {
    config_pairs(cfg)
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub task: String,
    pub instances: usize,
    pub subjects: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    /// Resolved configuration, including defaults the file left out.
    pub config: BTreeMap<String, String>,
    pub dataset: DatasetSummary,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub report: EvalReport,
}

impl ReportDocument {
    pub fn new(cfg: &PipelineConfig, dataset: DatasetSummary, report: EvalReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: config_map(cfg),
            dataset,
            macro_f1: report.metrics.macro_f1,
            accuracy: report.metrics.accuracy,
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Per-class rows, then macro averages and accuracy.
pub fn report_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "tp", "fp", "fn", "tn", "precision", "recall", "f1"])?;
    for m in &report.metrics.per_class {
        w.write_record([
            m.class.clone(),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
        ])?;
    }
    let m = &report.metrics;
    let blank = String::new;
    w.write_record([
        "macro".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        m.macro_precision.to_string(),
        m.macro_recall.to_string(),
        m.macro_f1.to_string(),
    ])?;
    w.write_record([
        "accuracy".into(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        blank(),
        m.accuracy.to_string(),
    ])?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Right-aligned table, true classes down, predictions across.
pub fn confusion_text(cm: &ConfusionMatrix) -> String {
    let label_w = cm
        .classes
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("true\\pred".len());
    let col_w: Vec<usize> = (0..cm.n_classes())
        .map(|c| {
            let widest = cm
                .counts
                .iter()
                .map(|r| r[c].to_string().len())
                .max()
                .unwrap_or(1);
            widest.max(cm.classes[c].len())
        })
        .collect();
    let mut s = format!("{:<label_w$}", "true\\pred");
    for (c, w) in col_w.iter().enumerate() {
        let _ = write!(s, "  {:>w$}", cm.classes[c]);
    }
    s.push('\n');
    for (r, row) in cm.counts.iter().enumerate() {
        let _ = write!(s, "{:<label_w$}", cm.classes[r]);
        for (v, w) in row.iter().zip(&col_w) {
            let _ = write!(s, "  {v:>w$}");
        }
        s.push('\n');
    }
    s
}

/// Human-readable summary: metrics then the pooled confusion matrix.
pub fn report_text(doc: &ReportDocument) -> String {
    let m = &doc.report.metrics;
    let f = &doc.report.fold_mean;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "task {}: {} instances, {} subjects, {} folds",
        doc.dataset.task,
        doc.dataset.instances,
        doc.dataset.subjects,
        doc.report.folds.len()
    );
    let _ = writeln!(
        s,
        "pooled    P {:.4}  R {:.4}  F1 {:.4}  acc {:.4}",
        m.macro_precision, m.macro_recall, m.macro_f1, m.accuracy
    );
    let _ = writeln!(
        s,
        "fold mean P {:.4}  R {:.4}  F1 {:.4}  acc {:.4}",
        f.macro_precision, f.macro_recall, f.macro_f1, f.accuracy
    );
    s.push('\n');
    s.push_str(&confusion_text(&doc.report.confusion));
    s
}

/// A fitted pipeline with the config it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub config: BTreeMap<String, String>,
    pub model: FittedPipeline,
}

impl ModelDocument {
    pub fn new(cfg: &PipelineConfig, model: FittedPipeline) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: config_map(cfg),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: u32,
        }
        let v: Version = serde_json::from_str(text)?;
        if v.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "model schema version {} is not supported (expected {SCHEMA_VERSION})",
                v.schema_version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }
}
