//! Confusion matrices, P/R/F1, and leave-persons-out cross-validation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, LabeledInstance};
use crate::error::{param, Error, Result};
use crate::rng::{seeded, shuffle};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = classes.len();
        if n == 0 || counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::Format(format!("confusion matrix must be {n}x{n}")));
        }
        Ok(Self { classes, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn from_predictions(
        classes: Vec<String>,
        truth: &[usize],
        predicted: &[usize],
    ) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut cm = Self::new(classes);
        let n = cm.n_classes();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n || p >= n {
                return Err(param(format!("label {} outside {n} classes", t.max(p))));
            }
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Entry-wise sum; both matrices must share the class list.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(param("confusion matrices have different class lists"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// One-vs-rest counts per class, macro averages, and accuracy (trace over
/// total). Empty denominators give 0.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let n = cm.n_classes();
    let total = cm.total();
    let mut per_class = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.counts[c][c];
        let actual: u64 = cm.counts[c].iter().sum();
        let predicted: u64 = (0..n).map(|r| cm.counts[r][c]).sum();
        let fp = predicted - tp;
        let fn_ = actual - tp;
        let tn = total - tp - fp - fn_;
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class: cm.classes[c].clone(),
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / n as f64;
    let trace: u64 = (0..n).map(|c| cm.counts[c][c]).sum();
    Metrics {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: ratio(trace, total),
        per_class,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_subjects: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Plain averages of the per-fold numbers, reported alongside the pooled
/// metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldMean {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Pooled confusion over all folds.
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub fold_mean: FoldMean,
    pub folds: Vec<FoldReport>,
}

/// Assigns subjects to `n_folds` groups: subjects are sorted, shuffled
/// under `seed`, then dealt round-robin.
pub fn plan_folds(subjects: &[String], n_folds: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let mut s: Vec<String> = subjects.to_vec();
    s.sort();
    s.dedup();
    if n_folds == 0 || n_folds > s.len() {
        return Err(param(format!(
            "n_folds = {n_folds} must lie in 1..={} (distinct subjects)",
            s.len()
        )));
    }
    shuffle(&mut s, &mut seeded(seed));
    let mut folds = vec![Vec::new(); n_folds];
    for (i, subj) in s.into_iter().enumerate() {
        folds[i % n_folds].push(subj);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

/// A pipeline that is fitted on training instances and then labels test
/// instances.
pub trait Learner {
    type Model;
    fn fit(&self, train: &[&LabeledInstance], n_classes: usize) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, test: &[&LabeledInstance]) -> Result<Vec<usize>>;
}

/// Training and test instances for one set of held-out subjects.
pub fn split_by_subjects<'a>(
    ds: &'a Dataset,
    test_subjects: &[String],
) -> (Vec<&'a LabeledInstance>, Vec<&'a LabeledInstance>) {
    ds.instances
        .iter()
        .partition(|i| !test_subjects.contains(&i.subject_id))
}

/// Fits on everything except `test_subjects`.
pub fn fit_fold<L: Learner>(
    ds: &Dataset,
    test_subjects: &[String],
    learner: &L,
) -> Result<L::Model> {
    let (train, _) = split_by_subjects(ds, test_subjects);
    if train.is_empty() {
        return Err(param("fold leaves no training instances"));
    }
    learner.fit(&train, ds.n_classes())
}

pub fn evaluate_fold<L: Learner>(
    ds: &Dataset,
    fold: usize,
    test_subjects: &[String],
    learner: &L,
) -> Result<FoldReport> {
    let (train, test) = split_by_subjects(ds, test_subjects);
    if train.is_empty() {
        return Err(param("fold leaves no training instances"));
    }
    let model = learner.fit(&train, ds.n_classes())?;
    let pred = learner.predict(&model, &test)?;
    let truth: Vec<usize> = test.iter().map(|i| i.label).collect();
    let confusion = ConfusionMatrix::from_predictions(ds.class_names.clone(), &truth, &pred)?;
    let metrics = metrics(&confusion);
    Ok(FoldReport {
        fold,
        test_subjects: test_subjects.to_vec(),
        confusion,
        metrics,
    })
}

/// Pools fold confusion matrices and computes the final metrics from the
/// sum.
pub fn aggregate(classes: Vec<String>, folds: Vec<FoldReport>) -> Result<EvalReport> {
    let mut confusion = ConfusionMatrix::new(classes);
    for f in &folds {
        confusion.merge(&f.confusion)?;
    }
    let k = folds.len().max(1) as f64;
    let avg = |g: fn(&Metrics) -> f64| folds.iter().map(|f| g(&f.metrics)).sum::<f64>() / k;
    let fold_mean = FoldMean {
        macro_precision: avg(|m| m.macro_precision),
        macro_recall: avg(|m| m.macro_recall),
        macro_f1: avg(|m| m.macro_f1),
        accuracy: avg(|m| m.accuracy),
    };
    Ok(EvalReport {
        metrics: metrics(&confusion),
        confusion,
        fold_mean,
        folds,
    })
}

/// Logs subjects that contribute a single class only.
pub fn warn_single_class_subjects(ds: &Dataset) {
    for s in ds.subjects() {
        let mut labels = ds
            .instances
            .iter()
            .filter(|i| i.subject_id == s)
            .map(|i| i.label);
        let first = labels.next();
        if labels.all(|l| Some(l) == first) {
            log::warn!("subject {s} has instances of a single class");
        }
    }
}

/// Leave-persons-out k-fold evaluation, folds run in order.
pub fn kfold_leave_persons_out<L: Learner>(
    ds: &Dataset,
    n_folds: usize,
    learner: &L,
    seed: u64,
) -> Result<EvalReport> {
    warn_single_class_subjects(ds);
    let plan = plan_folds(&ds.subjects(), n_folds, seed)?;
    let folds = plan
        .iter()
        .enumerate()
        .map(|(f, subj)| evaluate_fold(ds, f, subj, learner))
        .collect::<Result<Vec<_>>>()?;
    aggregate(ds.class_names.clone(), folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn diagonal_is_perfect() {
        let cm = ConfusionMatrix::from_counts(
            names(3),
            vec![vec![4, 0, 0], vec![0, 2, 0], vec![0, 0, 7]],
        )
        .unwrap();
        let m = metrics(&cm);
        assert_eq!(m.accuracy, 1.0);
        assert!(m.per_class.iter().all(|c| c.f1 == 1.0));
    }

    #[test]
    fn binary_accuracy() {
        // Class 0 as positive: TP 5, FN 1, FP 1, TN 3.
        let cm = ConfusionMatrix::from_counts(names(2), vec![vec![5, 1], vec![1, 3]]).unwrap();
        let m = metrics(&cm);
        assert!((m.accuracy - 0.8).abs() < 1e-15);
        let c = &m.per_class[0];
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (5, 1, 1, 3));
    }

    #[test]
    fn empty_columns_give_zero() {
        let cm = ConfusionMatrix::from_counts(names(2), vec![vec![3, 0], vec![2, 0]]).unwrap();
        let m = metrics(&cm);
        assert_eq!(m.per_class[1].precision, 0.0);
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    #[test]
    fn folds_partition_subjects() {
        let s: Vec<String> = (1..=9).map(|i| format!("s{i:02}")).collect();
        let plan = plan_folds(&s, 9, 4).unwrap();
        let mut all: Vec<String> = plan.iter().flatten().cloned().collect();
        all.sort();
        assert_eq!(all, s);
        assert!(plan.iter().all(|f| f.len() == 1));
        assert!(plan_folds(&s, 10, 4).is_err());
        assert_eq!(plan, plan_folds(&s, 9, 4).unwrap());
    }
}
