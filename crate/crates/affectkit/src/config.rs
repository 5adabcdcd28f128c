//! Flat `key = value` pipeline configuration with dotted sections.
//!
//! ```text
//! task = gaze9
//! features = qpca(A,15) + dtnnp
//! classifier = knn
//! knn.k = 5
//! eval.folds = 9
//! ```
//!
//! Lines starting with `#` are comments. Keys of inactive sections (for
//! example `svm.*` while `classifier = knn`) are accepted and ignored; keys
//! outside the schema are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use affectkit_core::classify::{
    BoostVariant, ClassifierSpec, ForestParams, Kernel, KnnRule, Metric, SvmParams,
};
use affectkit_core::dataio::TaskKind;
use affectkit_core::dimred::TsneParams;
use affectkit_core::pipeline::{FeatureRecipe, PipelineConfig, Reducer};
use affectkit_core::preprocess::MagnificationParams;

use crate::error::{Error, Result};

const KEYS: &[&str] = &[
    "task",
    "normalize",
    "median_window",
    "mag.enabled",
    "mag.alpha",
    "mag.lo_hz",
    "mag.hi_hz",
    "mag.rate_hz",
    "features",
    "reducer",
    "pca.k",
    "tsne.out_dims",
    "tsne.perplexity",
    "tsne.iterations",
    "tsne.learning_rate",
    "tsne.momentum_initial",
    "tsne.momentum_final",
    "tsne.momentum_switch",
    "tsne.exaggeration",
    "tsne.exaggeration_iters",
    "tsne.seed",
    "classifier",
    "knn.k",
    "knn.metric",
    "knn.rule",
    "svm.kernel",
    "svm.c",
    "svm.gamma",
    "svm.tol",
    "svm.max_iter",
    "boost.rounds",
    "rf.trees",
    "rf.max_depth",
    "rf.bootstrap",
    "rf.seed",
    "eval.folds",
    "eval.seed",
];

/// Raw key/value pairs with the line each came from.
pub type RawConfig = BTreeMap<String, (String, usize)>;

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut out = RawConfig::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim().to_string();
        if let Some((_, prev)) = out.insert(k.clone(), (v.trim().to_string(), i + 1)) {
            return Err(Error::Config(format!(
                "line {}: `{k}` already set on line {prev}",
                i + 1
            )));
        }
    }
    let unknown: Vec<String> = out
        .keys()
        .filter(|k| !KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }
    Ok(out)
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn str(&self, key: &str) -> Option<&str> {
        self.raw.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| {
                Error::Config(format!("line {line}: `{key}` has invalid value `{v}`"))
            }),
        }
    }

    fn with<T>(
        &self,
        key: &str,
        default: T,
        f: impl Fn(&str) -> affectkit_core::Result<T>,
    ) -> Result<T> {
        match self.raw.get(key) {
            None => Ok(default),
            Some((v, line)) => {
                f(v).map_err(|e| Error::Config(format!("line {line}: `{key}`: {e}")))
            }
        }
    }

    /// `none` or a value.
    fn optional<T: FromStr>(&self, key: &str, default: Option<T>, none: &str) -> Result<Option<T>> {
        match self.raw.get(key) {
            None => Ok(default),
            Some((v, _)) if v == none => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|_| {
                Error::Config(format!("line {line}: `{key}` has invalid value `{v}`"))
            }),
        }
    }
}

fn split_features(s: &str) -> affectkit_core::Result<Vec<FeatureRecipe>> {
    s.split('+')
        .map(|p| FeatureRecipe::parse(p.trim()))
        .collect()
}

/// Builds a config on top of the quaternion gaze defaults.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let raw = parse_raw(text)?;
    let r = Reader { raw: &raw };
    let base = PipelineConfig::gaze_quaternion(15);

    let mag_default = MagnificationParams::default();
    let magnification = if r.get("mag.enabled", false)? {
        Some(MagnificationParams {
            alpha: r.get("mag.alpha", mag_default.alpha)?,
            band_lo_hz: r.get("mag.lo_hz", mag_default.band_lo_hz)?,
            band_hi_hz: r.get("mag.hi_hz", mag_default.band_hi_hz)?,
            sample_rate_hz: r.get("mag.rate_hz", mag_default.sample_rate_hz)?,
        })
    } else {
        None
    };

    let reducer = match r.str("reducer").unwrap_or("none") {
        "none" => Reducer::None,
        "pca" => Reducer::Pca {
            k: r.get("pca.k", 10)?,
        },
        "tsne" => {
            let d = TsneParams::default();
            Reducer::Tsne(TsneParams {
                out_dims: r.get("tsne.out_dims", d.out_dims)?,
                perplexity: r.get("tsne.perplexity", d.perplexity)?,
                iterations: r.get("tsne.iterations", d.iterations)?,
                learning_rate: r.get("tsne.learning_rate", d.learning_rate)?,
                momentum_initial: r.get("tsne.momentum_initial", d.momentum_initial)?,
                momentum_final: r.get("tsne.momentum_final", d.momentum_final)?,
                momentum_switch: r.get("tsne.momentum_switch", d.momentum_switch)?,
                exaggeration: r.get("tsne.exaggeration", d.exaggeration)?,
                exaggeration_iters: r.get("tsne.exaggeration_iters", d.exaggeration_iters)?,
                seed: r.get("tsne.seed", d.seed)?,
            })
        }
        other => {
            return Err(Error::Config(format!(
                "unknown reducer `{other}` (none, pca, tsne)"
            )))
        }
    };

    let classifier = match r.str("classifier").unwrap_or("knn") {
        "knn" => ClassifierSpec::Knn {
            k: r.get("knn.k", 5)?,
            metric: r.with("knn.metric", Metric::Cosine, Metric::parse)?,
            rule: r.with("knn.rule", KnnRule::Majority, KnnRule::parse)?,
        },
        "svm" => {
            let d = SvmParams::default();
            ClassifierSpec::Svm(SvmParams {
                kernel: r.with("svm.kernel", d.kernel, Kernel::parse)?,
                c: r.get("svm.c", d.c)?,
                gamma: r.optional("svm.gamma", d.gamma, "auto")?,
                tol: r.get("svm.tol", d.tol)?,
                max_iter: r.get("svm.max_iter", d.max_iter)?,
            })
        }
        name @ ("gentleboost" | "adaboost_m2") => ClassifierSpec::Boost {
            variant: BoostVariant::parse(name)?,
            rounds: r.get("boost.rounds", 100)?,
        },
        "random_forest" => {
            let d = ForestParams::default();
            ClassifierSpec::RandomForest(ForestParams {
                n_trees: r.get("rf.trees", d.n_trees)?,
                max_depth: r.optional("rf.max_depth", d.max_depth, "none")?,
                bootstrap: r.get("rf.bootstrap", d.bootstrap)?,
                seed: r.get("rf.seed", d.seed)?,
            })
        }
        other => {
            return Err(Error::Config(format!(
                "unknown classifier `{other}` (knn, svm, gentleboost, adaboost_m2, random_forest)"
            )))
        }
    };

    let cfg = PipelineConfig {
        task: r.with("task", base.task, TaskKind::parse)?,
        normalize: r.get("normalize", base.normalize)?,
        median_window: r.get("median_window", base.median_window)?,
        magnification,
        features: r.with("features", base.features.clone(), split_features)?,
        reducer,
        classifier,
        folds: r.get("eval.folds", base.folds)?,
        seed: r.get("eval.seed", base.seed)?,
    };
    cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

/// Ordered key/value view of a config; inactive sections are omitted.
pub fn config_pairs(cfg: &PipelineConfig) -> Vec<(&'static str, String)> {
    let mut v: Vec<(&'static str, String)> = vec![
        ("task", cfg.task.name()),
        ("normalize", cfg.normalize.to_string()),
        ("median_window", cfg.median_window.to_string()),
        ("mag.enabled", cfg.magnification.is_some().to_string()),
    ];
    if let Some(m) = &cfg.magnification {
        v.push(("mag.alpha", m.alpha.to_string()));
        v.push(("mag.lo_hz", m.band_lo_hz.to_string()));
        v.push(("mag.hi_hz", m.band_hi_hz.to_string()));
        v.push(("mag.rate_hz", m.sample_rate_hz.to_string()));
    }
    let features: Vec<String> = cfg.features.iter().map(|f| f.to_string()).collect();
    v.push(("features", features.join(" + ")));
    match &cfg.reducer {
        Reducer::None => v.push(("reducer", "none".into())),
        Reducer::Pca { k } => {
            v.push(("reducer", "pca".into()));
            v.push(("pca.k", k.to_string()));
        }
        Reducer::Tsne(p) => {
            v.push(("reducer", "tsne".into()));
            v.push(("tsne.out_dims", p.out_dims.to_string()));
            v.push(("tsne.perplexity", p.perplexity.to_string()));
            v.push(("tsne.iterations", p.iterations.to_string()));
            v.push(("tsne.learning_rate", p.learning_rate.to_string()));
            v.push(("tsne.momentum_initial", p.momentum_initial.to_string()));
            v.push(("tsne.momentum_final", p.momentum_final.to_string()));
            v.push(("tsne.momentum_switch", p.momentum_switch.to_string()));
            v.push(("tsne.exaggeration", p.exaggeration.to_string()));
            v.push(("tsne.exaggeration_iters", p.exaggeration_iters.to_string()));
            v.push(("tsne.seed", p.seed.to_string()));
        }
    }
    match &cfg.classifier {
        ClassifierSpec::Knn { k, metric, rule } => {
            v.push(("classifier", "knn".into()));
            v.push(("knn.k", k.to_string()));
            v.push(("knn.metric", metric.name().into()));
            v.push(("knn.rule", rule.name().into()));
        }
        ClassifierSpec::Svm(p) => {
            v.push(("classifier", "svm".into()));
            v.push(("svm.kernel", p.kernel.name().into()));
            v.push(("svm.c", p.c.to_string()));
            v.push((
                "svm.gamma",
                p.gamma.map_or("auto".into(), |g| g.to_string()),
            ));
            v.push(("svm.tol", p.tol.to_string()));
            v.push(("svm.max_iter", p.max_iter.to_string()));
        }
        ClassifierSpec::Boost { variant, rounds } => {
            v.push(("classifier", variant.name().into()));
            v.push(("boost.rounds", rounds.to_string()));
        }
        ClassifierSpec::RandomForest(p) => {
            v.push(("classifier", "random_forest".into()));
            v.push(("rf.trees", p.n_trees.to_string()));
            v.push((
                "rf.max_depth",
                p.max_depth.map_or("none".into(), |d| d.to_string()),
            ));
            v.push(("rf.bootstrap", p.bootstrap.to_string()));
            v.push(("rf.seed", p.seed.to_string()));
        }
    }
    v.push(("eval.folds", cfg.folds.to_string()));
    v.push(("eval.seed", cfg.seed.to_string()));
    v
}

pub fn serialize_config(cfg: &PipelineConfig) -> String {
    let mut s = String::new();
    for (k, v) in config_pairs(cfg) {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}
