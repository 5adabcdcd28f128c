//! Command-line front end: `synth`, `extract`, `eval`, `render`.
//!
//! Exit status is 0 on success, 2 when inputs or configuration are
//! rejected before any computation starts, and 1 for failures after that.

use std::fs;
use std::path::{Path, PathBuf};

use affectkit_core::dataio::{
    synth_expression_task, synth_gaze_dataset, Dataset, TaskKind, DEFAULT_DISPLACEMENT_SCALE,
};
use affectkit_core::eval::{
    aggregate, evaluate_fold, plan_folds, warn_single_class_subjects, Learner,
};
use affectkit_core::origami::{build_lang_polygon, build_shadow_tree, shrink, ShrinkParams};
use affectkit_core::pipeline::{
    extract_matrix, fit_features, fit_reducer, Pipeline, PipelineConfig, Reducer,
};
use affectkit_core::preprocess::select_peak_frame;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{parse_config, serialize_config};
use crate::io::{load_dataset, load_landmarks_jsonl, write_atomic, write_dataset};
use crate::render::{crease_from_json, crease_json, crease_svg};
use crate::report::{report_csv, report_text, DatasetSummary, ModelDocument, ReportDocument};

#[derive(Debug, Parser)]
#[command(
    name = "affectkit",
    version,
    about = "Affective EEG and facial descriptors: synthesize, extract, evaluate, render"
)]
pub struct Cli {
    /// Seed for synthesis; overrides `eval.seed` for extract and eval.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for fold evaluation (0 picks one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (manifest plus per-instance files).
    Synth(SynthArgs),
    /// Fit the configured features on a dataset and write them as CSV.
    Extract(DataArgs),
    /// Leave-persons-out evaluation; writes JSON, CSV and text reports.
    Eval(EvalArgs),
    /// Draw a crease pattern from landmarks (`.jsonl`) or a saved pattern (`.json`).
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// gaze9, sem_pair1..sem_pair4 or ck_emotion7.
    #[arg(long, default_value = "gaze9")]
    pub task: String,
    #[arg(long, default_value_t = 9)]
    pub subjects: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Signal-to-noise ratio of the EEG tasks.
    #[arg(long, default_value_t = 10.0)]
    pub snr: f64,
    /// Expression displacement scale of the landmark tasks.
    #[arg(long, default_value_t = DEFAULT_DISPLACEMENT_SCALE)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also fit on the whole dataset and write `model.json`.
    #[arg(long)]
    pub save_model: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Landmark frame to fold; the peak frame by default.
    #[arg(long)]
    pub frame: Option<usize>,
}

/// An error with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

trait Stage<T> {
    fn invalid(self) -> Result<T, Failure>;
    fn failed(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn invalid(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 2,
            error: e.into(),
        })
    }
    fn failed(self) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code: 1,
            error: e.into(),
        })
    }
}

fn out_path(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Extract(a) => extract(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Render(a) => render(cli, a),
    }
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<(), Failure> {
    let task = TaskKind::parse(&a.task).invalid()?;
    let seed = cli.seed.unwrap_or(0);
    let ds = match task {
        TaskKind::Gaze9 => synth_gaze_dataset(seed, a.subjects, a.reps, a.snr),
        _ => synth_expression_task(task, seed, a.subjects, a.reps, a.scale),
    }
    .invalid()?;
    let dir = out_path(cli, "data");
    write_dataset(&dir, &ds).failed()?;
    log::info!(
        "wrote {} instances to {}",
        ds.instances.len(),
        dir.display()
    );
    Ok(())
}

/// Config and dataset, checked against each other.
fn prepare(cli: &Cli, a: &DataArgs) -> Result<(PipelineConfig, Dataset), Failure> {
    let text = fs::read_to_string(&a.config)
        .with_context(|| format!("reading {}", a.config.display()))
        .invalid()?;
    let mut cfg = parse_config(&text)
        .with_context(|| format!("in {}", a.config.display()))
        .invalid()?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ds = load_dataset(&a.data).invalid()?;
    cfg.check_modalities(&ds).invalid()?;
    Ok((cfg, ds))
}

fn extract(cli: &Cli, a: &DataArgs) -> Result<(), Failure> {
    let (cfg, ds) = prepare(cli, a)?;
    let all: Vec<_> = ds.instances.iter().collect();
    let fitted = fit_features(&cfg, &all).failed()?;
    let x = extract_matrix(&cfg, &fitted, &all).failed()?;
    let (names, z) = match &cfg.reducer {
        Reducer::None => {
            let first = all.first().context("dataset is empty").invalid()?;
            let mut names = Vec::with_capacity(x.cols());
            for f in &fitted {
                let v = f.extract(&cfg, first).failed()?;
                names.extend((0..v.len()).map(|i| format!("{}_{i}", v.tag.short())));
            }
            (names, x)
        }
        r => {
            let prefix = if matches!(r, Reducer::Pca { .. }) {
                "pca"
            } else {
                "tsne"
            };
            let (_, z) = fit_reducer(r, x).failed()?;
            ((0..z.cols()).map(|i| format!("{prefix}_{i}")).collect(), z)
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["subject".to_string(), "label".to_string()];
    header.extend(names);
    w.write_record(&header).failed()?;
    for (inst, row) in ds.instances.iter().zip(z.iter_rows()) {
        let mut rec = vec![inst.subject_id.clone(), ds.class_names[inst.label].clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).failed()?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("{e}"))
        .failed()?;
    write_atomic(&out_path(cli, "features.csv"), &bytes).failed()?;
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<(), Failure> {
    let (cfg, ds) = prepare(cli, &a.data)?;
    let learner = Pipeline::new(cfg.clone()).invalid()?;
    let plan = plan_folds(&ds.subjects(), cfg.folds, cfg.seed).invalid()?;
    warn_single_class_subjects(&ds);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .failed()?;
    // Folds finish in any order; collecting keeps them in plan order.
    let folds = pool
        .install(|| {
            plan.par_iter()
                .enumerate()
                .map(|(f, subjects)| evaluate_fold(&ds, f, subjects, &learner))
                .collect::<Result<Vec<_>, _>>()
        })
        .failed()?;
    let report = aggregate(ds.class_names.clone(), folds).failed()?;
    let summary = DatasetSummary {
        task: ds.task_kind.name(),
        instances: ds.instances.len(),
        subjects: ds.subjects().len(),
    };
    let doc = ReportDocument::new(&cfg, summary, report);
    let dir = out_path(cli, "report");
    write_atomic(&dir.join("report.json"), doc.to_json().failed()?.as_bytes()).failed()?;
    write_atomic(
        &dir.join("report.csv"),
        report_csv(&doc.report).failed()?.as_bytes(),
    )
    .failed()?;
    write_atomic(&dir.join("report.txt"), report_text(&doc).as_bytes()).failed()?;
    write_atomic(&dir.join("config.cfg"), serialize_config(&cfg).as_bytes()).failed()?;
    if a.save_model {
        let all: Vec<_> = ds.instances.iter().collect();
        let model = learner.fit(&all, ds.n_classes()).failed()?;
        let json = ModelDocument::new(&cfg, model).to_json().failed()?;
        write_atomic(&dir.join("model.json"), json.as_bytes()).failed()?;
    }
    println!("macro F1 {:.4}  accuracy {:.4}", doc.macro_f1, doc.accuracy);
    Ok(())
}

fn is_landmarks(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

fn render(cli: &Cli, a: &RenderArgs) -> Result<(), Failure> {
    let svg_path = out_path(cli, "crease.svg");
    if is_landmarks(&a.input) {
        let seq = load_landmarks_jsonl(&a.input, affectkit_core::dataio::FACE_FPS).invalid()?;
        let k = a.frame.unwrap_or_else(|| select_peak_frame(&seq));
        let frame = seq
            .frames
            .get(k)
            .with_context(|| format!("frame {k} out of range (0..{})", seq.len()))
            .invalid()?;
        let tree = build_shadow_tree(frame).failed()?;
        let poly = build_lang_polygon(&tree).failed()?;
        let cp = shrink(&poly, &ShrinkParams::for_polygon(&poly)).failed()?;
        write_atomic(&svg_path, crease_svg(&cp, Some(&poly)).as_bytes()).failed()?;
        write_atomic(
            &svg_path.with_extension("json"),
            crease_json(&cp).failed()?.as_bytes(),
        )
        .failed()?;
    } else {
        let text = fs::read_to_string(&a.input)
            .with_context(|| format!("reading {}", a.input.display()))
            .invalid()?;
        let cp = crease_from_json(&text).invalid()?;
        write_atomic(&svg_path, crease_svg(&cp, None).as_bytes()).failed()?;
    }
    Ok(())
}
