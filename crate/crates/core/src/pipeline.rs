//! Declarative recipes: preprocessing, per-instance features, an optional
//! reducer, and a classifier, fitted on training instances only.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::classify::{train, ClassifierSpec, KnnRule, Metric, TrainedModel};
use crate::dataio::{Dataset, EegRecording, LabeledInstance, TaskKind, REQUIRED_CHANNELS};
use crate::dimred::{pca_fit, tsne_extend, tsne_run, PcaModel, TsneParams};
use crate::error::{param, Error, Result};
use crate::eval::Learner;
use crate::features::{dtnnp, phog, phog_of_sequence, FeatureTag, FeatureVector};
use crate::linalg::Matrix;
use crate::origami::origami_descriptor;
use crate::preprocess::{
    magnify_landmarks, median_filter, normalize_channel, select_peak_frame, MagnificationParams,
};
use crate::quaternion::{
    eeg_to_quats, quaternion_pca_fit, quaternion_pca_project, ChannelMap, QpcaModel, Quat,
};

/// One block of the assembled feature vector. `magnified` variants read
/// the motion-magnified landmark sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureRecipe {
    /// Quaternion PCA over the EEG window, `4k` reals.
    QPca {
        map: String,
        k: usize,
    },
    /// Real PCA over the concatenated channels, `k` reals.
    Vector {
        k: usize,
    },
    Dtnnp {
        magnified: bool,
    },
    Phog {
        magnified: bool,
    },
    Origami {
        magnified: bool,
    },
}

impl FeatureRecipe {
    /// Parses `qpca(A,15)`, `vector(60)`, `dtnnp`, `phog_m`, `origami`...
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let args = |name: &str| -> Option<Vec<&str>> {
            let inner = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(inner.split(',').map(str::trim).collect())
        };
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| param(format!("bad integer `{v}` in `{s}`")))
        };
        if let Some(a) = args("qpca") {
            let [map, k] = a[..] else {
                return Err(param(format!("`{s}`: expected qpca(map,k)")));
            };
            if ChannelMap::by_name(map).is_none() {
                return Err(param(format!("unknown channel map `{map}`")));
            }
            return Ok(FeatureRecipe::QPca {
                map: map.to_string(),
                k: int(k)?,
            });
        }
        if let Some(a) = args("vector") {
            let [k] = a[..] else {
                return Err(param(format!("`{s}`: expected vector(k)")));
            };
            return Ok(FeatureRecipe::Vector { k: int(k)? });
        }
        Ok(match s {
            "dtnnp" => FeatureRecipe::Dtnnp { magnified: false },
            "dtnnp_m" => FeatureRecipe::Dtnnp { magnified: true },
            "phog" => FeatureRecipe::Phog { magnified: false },
            "phog_m" => FeatureRecipe::Phog { magnified: true },
            "origami" => FeatureRecipe::Origami { magnified: false },
            "origami_m" => FeatureRecipe::Origami { magnified: true },
            _ => return Err(param(format!("unknown feature recipe `{s}`"))),
        })
    }

    fn needs_eeg(&self) -> bool {
        matches!(
            self,
            FeatureRecipe::QPca { .. } | FeatureRecipe::Vector { .. }
        )
    }

    fn magnified(&self) -> bool {
        matches!(
            self,
            FeatureRecipe::Dtnnp { magnified: true }
                | FeatureRecipe::Phog { magnified: true }
                | FeatureRecipe::Origami { magnified: true }
        )
    }
}

impl fmt::Display for FeatureRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = |b: bool| if b { "_m" } else { "" };
        match self {
            FeatureRecipe::QPca { map, k } => write!(f, "qpca({map},{k})"),
            FeatureRecipe::Vector { k } => write!(f, "vector({k})"),
            FeatureRecipe::Dtnnp { magnified } => write!(f, "dtnnp{}", m(*magnified)),
            FeatureRecipe::Phog { magnified } => write!(f, "phog{}", m(*magnified)),
            FeatureRecipe::Origami { magnified } => write!(f, "origami{}", m(*magnified)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reducer {
    None,
    Pca { k: usize },
    Tsne(TsneParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: TaskKind,
    /// Divide each EEG channel by its standard deviation.
    pub normalize: bool,
    /// Median window applied to EEG channels; 1 disables.
    pub median_window: usize,
    /// Required by the `_m` feature variants.
    pub magnification: Option<MagnificationParams>,
    pub features: Vec<FeatureRecipe>,
    pub reducer: Reducer,
    pub classifier: ClassifierSpec,
    pub folds: usize,
    pub seed: u64,
}

impl PipelineConfig {
    /// Quaternion-PCA + kNN over four-channel EEG.
    pub fn gaze_quaternion(k: usize) -> Self {
        Self {
            task: TaskKind::Gaze9,
            normalize: true,
            median_window: 5,
            magnification: None,
            features: alloc::vec![FeatureRecipe::QPca { map: "A".into(), k }],
            reducer: Reducer::None,
            classifier: ClassifierSpec::Knn {
                k: 5,
                metric: Metric::Cosine,
                rule: KnnRule::Majority,
            },
            folds: 9,
            seed: 0,
        }
    }

    /// The same pipeline with a real-valued PCA over concatenated channels,
    /// keeping as many reals as the quaternion variant.
    pub fn gaze_vector(k: usize) -> Self {
        Self {
            features: alloc::vec![FeatureRecipe::Vector { k: 4 * k }],
            ..Self::gaze_quaternion(k)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(param("feature recipe is empty"));
        }
        if self.median_window == 0 || self.median_window % 2 == 0 {
            return Err(param("median window must be odd and at least 1"));
        }
        if self.folds == 0 {
            return Err(param("folds must be at least 1"));
        }
        for r in &self.features {
            match r {
                FeatureRecipe::QPca { k, .. } | FeatureRecipe::Vector { k } if *k == 0 => {
                    return Err(param(format!("`{r}` needs k >= 1")));
                }
                _ => {}
            }
            if r.magnified() && self.magnification.is_none() {
                return Err(param(format!("`{r}` needs magnification parameters")));
            }
        }
        if let Some(m) = &self.magnification {
            m.validate()?;
        }
        match &self.reducer {
            Reducer::Pca { k } if *k == 0 => return Err(param("reducer pca needs k >= 1")),
            Reducer::Tsne(p) if p.out_dims == 0 || !(p.perplexity > 0.0) => {
                return Err(param("t-SNE needs out_dims >= 1 and perplexity > 0"));
            }
            _ => {}
        }
        self.classifier.validate()
    }

    /// Checks that every instance carries the modalities the recipe reads.
    pub fn check_modalities(&self, ds: &Dataset) -> Result<()> {
        if ds.task_kind != self.task {
            return Err(param(format!(
                "config task `{}` does not match dataset task `{}`",
                self.task.name(),
                ds.task_kind.name()
            )));
        }
        for r in &self.features {
            for (n, inst) in ds.instances.iter().enumerate() {
                let ok = match r {
                    _ if r.needs_eeg() => inst.eeg.is_some(),
                    FeatureRecipe::Phog { magnified: false } => {
                        inst.image.is_some() || inst.landmarks.is_some()
                    }
                    _ => inst.landmarks.is_some(),
                };
                if !ok {
                    return Err(param(format!("`{r}` needs a modality instance {n} lacks")));
                }
            }
        }
        Ok(())
    }
}

fn preprocess_eeg(cfg: &PipelineConfig, rec: &EegRecording) -> Result<EegRecording> {
    let mut out = rec.clone();
    for (_, series) in out.channels.iter_mut() {
        if cfg.median_window > 1 {
            *series = median_filter(series, cfg.median_window)?;
        }
        if cfg.normalize {
            *series = normalize_channel(series)?;
        }
    }
    Ok(out)
}

fn eeg_of(inst: &LabeledInstance) -> Result<&EegRecording> {
    inst.eeg
        .as_ref()
        .ok_or_else(|| Error::MissingChannel("eeg".into()))
}

fn quats_of(cfg: &PipelineConfig, inst: &LabeledInstance, map: &ChannelMap) -> Result<Vec<Quat>> {
    eeg_to_quats(&preprocess_eeg(cfg, eeg_of(inst)?)?, map)
}

fn flat_channels(cfg: &PipelineConfig, inst: &LabeledInstance) -> Result<Vec<f64>> {
    let rec = preprocess_eeg(cfg, eeg_of(inst)?)?;
    let mut out = Vec::new();
    for name in REQUIRED_CHANNELS {
        out.extend_from_slice(
            rec.channel(name)
                .ok_or_else(|| Error::MissingChannel(name.into()))?,
        );
    }
    Ok(out)
}

/// Per-instance descriptor that needs no fitting.
fn fixed_features(
    cfg: &PipelineConfig,
    recipe: &FeatureRecipe,
    inst: &LabeledInstance,
) -> Result<FeatureVector> {
    let missing = || Error::MissingChannel("landmarks".into());
    let seq = match (recipe.magnified(), &inst.landmarks) {
        (true, Some(s)) => {
            let p = cfg
                .magnification
                .as_ref()
                .ok_or_else(|| param("magnification not configured"))?;
            Some(magnify_landmarks(s, p)?)
        }
        (false, Some(s)) => Some(s.clone()),
        (_, None) => None,
    };
    match recipe {
        FeatureRecipe::Dtnnp { .. } => Ok(dtnnp(seq.as_ref().ok_or_else(missing)?)),
        FeatureRecipe::Phog { magnified } => match (&inst.image, magnified) {
            (Some(img), false) => phog(img),
            _ => phog_of_sequence(seq.as_ref().ok_or_else(missing)?),
        },
        FeatureRecipe::Origami { .. } => {
            let s = seq.as_ref().ok_or_else(missing)?;
            origami_descriptor(&s.frames[select_peak_frame(s)])
        }
        FeatureRecipe::QPca { .. } | FeatureRecipe::Vector { .. } => {
            unreachable!("fitted recipes handled separately")
        }
    }
}

/// A feature block after fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedRecipe {
    QPca { map: ChannelMap, model: QpcaModel },
    Vector { model: PcaModel },
    Fixed { recipe: FeatureRecipe },
}

impl FittedRecipe {
    /// This block's descriptor for one instance.
    pub fn extract(&self, cfg: &PipelineConfig, inst: &LabeledInstance) -> Result<FeatureVector> {
        match self {
            FittedRecipe::QPca { map, model } => FeatureVector::new(
                quaternion_pca_project(model, &quats_of(cfg, inst, map)?)?,
                FeatureTag::Q,
            ),
            FittedRecipe::Vector { model } => {
                let v = flat_channels(cfg, inst)?;
                let row = Matrix::from_vec(1, v.len(), v)?;
                FeatureVector::new(model.transform(&row)?.row(0).to_vec(), FeatureTag::Eeg)
            }
            FittedRecipe::Fixed { recipe } => fixed_features(cfg, recipe, inst),
        }
    }
}

/// Fits the feature blocks on `instances` (labels unused).
pub fn fit_features(
    cfg: &PipelineConfig,
    instances: &[&LabeledInstance],
) -> Result<Vec<FittedRecipe>> {
    cfg.features
        .iter()
        .map(|r| {
            Ok(match r {
                FeatureRecipe::QPca { map, k } => {
                    let map = ChannelMap::by_name(map)
                        .ok_or_else(|| param(format!("unknown channel map `{map}`")))?;
                    let data = instances
                        .iter()
                        .map(|i| quats_of(cfg, i, &map))
                        .collect::<Result<Vec<_>>>()?;
                    let model = quaternion_pca_fit(&data, *k)?;
                    FittedRecipe::QPca { map, model }
                }
                FeatureRecipe::Vector { k } => {
                    let rows = instances
                        .iter()
                        .map(|i| flat_channels(cfg, i))
                        .collect::<Result<Vec<_>>>()?;
                    let x = Matrix::from_rows(&rows)?;
                    FittedRecipe::Vector {
                        model: pca_fit(&x, *k)?,
                    }
                }
                other => FittedRecipe::Fixed {
                    recipe: other.clone(),
                },
            })
        })
        .collect()
}

/// Row-stacked assembled features.
pub fn extract_matrix(
    cfg: &PipelineConfig,
    fitted: &[FittedRecipe],
    instances: &[&LabeledInstance],
) -> Result<Matrix> {
    let rows = instances
        .iter()
        .map(|inst| {
            let mut row = Vec::new();
            for f in fitted {
                row.extend(f.extract(cfg, inst)?.values);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedReducer {
    None,
    Pca(PcaModel),
    /// Training inputs and their embedding; new points are placed by
    /// kernel-weighted averaging.
    Tsne {
        train_x: Matrix,
        train_y: Matrix,
        perplexity: f64,
    },
}

impl FittedReducer {
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            FittedReducer::None => Ok(x.clone()),
            FittedReducer::Pca(m) => m.transform(x),
            FittedReducer::Tsne {
                train_x,
                train_y,
                perplexity,
            } => tsne_extend(train_x, train_y, x, *perplexity),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub features: Vec<FittedRecipe>,
    pub reducer: FittedReducer,
    pub classifier: TrainedModel,
}

/// Fits `reducer` on `x` and returns it with the reduced training rows.
pub fn fit_reducer(reducer: &Reducer, x: Matrix) -> Result<(FittedReducer, Matrix)> {
    Ok(match reducer {
        Reducer::None => (FittedReducer::None, x),
        Reducer::Pca { k } => {
            let m = pca_fit(&x, *k)?;
            let z = m.transform(&x)?;
            (FittedReducer::Pca(m), z)
        }
        Reducer::Tsne(p) => {
            let run = tsne_run(&x, p)?;
            let z = run.embedding.clone();
            (
                FittedReducer::Tsne {
                    train_x: x,
                    train_y: run.embedding,
                    perplexity: p.perplexity,
                },
                z,
            )
        }
    })
}

/// [`Learner`] wrapper around a config.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Learner for Pipeline {
    type Model = FittedPipeline;

    fn fit(&self, train_set: &[&LabeledInstance], _n_classes: usize) -> Result<FittedPipeline> {
        let cfg = &self.config;
        let features = fit_features(cfg, train_set)?;
        let x = extract_matrix(cfg, &features, train_set)?;
        let (reducer, z) = fit_reducer(&cfg.reducer, x)?;
        let y: Vec<usize> = train_set.iter().map(|i| i.label).collect();
        let classifier = train(&cfg.classifier, &z, &y)?;
        Ok(FittedPipeline {
            features,
            reducer,
            classifier,
        })
    }

    fn predict(&self, model: &FittedPipeline, test: &[&LabeledInstance]) -> Result<Vec<usize>> {
        if test.is_empty() {
            return Ok(Vec::new());
        }
        let x = extract_matrix(&self.config, &model.features, test)?;
        let z = model.reducer.apply(&x)?;
        Ok(model.classifier.predict_all(&z))
    }
}
