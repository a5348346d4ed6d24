//! Datasets, class posteriors, statistics vectors and the shared loss
//! primitives used by every learner.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of a single feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum FeatureKind {
    /// Integer codes in `1..=cardinality`.
    Categorical { cardinality: usize },
    Continuous,
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }
}

/// An in-memory dataset: an m x n feature matrix plus labels in `1..=r`.
///
/// Categorical feature values are stored as real numbers but must be
/// integers within their declared cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>, // row-major m x n
    labels: Vec<usize>,
    schema: Vec<FeatureKind>,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        schema: Vec<FeatureKind>,
        class_count: usize,
    ) -> Result<Self> {
        let m = labels.len();
        let n = schema.len();
        if m == 0 {
            return Err(Error::InvalidArgument("dataset has no instances".into()));
        }
        if class_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "class count must be at least 2, got {class_count}"
            )));
        }
        if features.len() != m * n {
            return Err(Error::InvalidArgument(format!(
                "feature matrix has {} values, expected {m} x {n}",
                features.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y < 1 || y > class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 1..={class_count}"
            )));
        }
        for (j, kind) in schema.iter().enumerate() {
            for i in 0..m {
                let v = features[i * n + j];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite value in feature {j} at instance {i}"
                    )));
                }
                if let FeatureKind::Categorical { cardinality } = kind {
                    if v.fract() != 0.0 || v < 1.0 || v > *cardinality as f64 {
                        return Err(Error::InvalidArgument(format!(
                            "categorical feature {j} holds {v} outside 1..={cardinality}"
                        )));
                    }
                }
            }
        }
        Ok(Dataset {
            features,
            labels,
            schema,
            class_count,
        })
    }

    /// Number of instances m.
    pub fn instance_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of features n.
    pub fn feature_count(&self) -> usize {
        self.schema.len()
    }

    /// Number of classes r.
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.feature_count();
        &self.features[i * n..(i + 1) * n]
    }

    /// Label of instance `i`, in `1..=r`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn schema(&self) -> &[FeatureKind] {
        &self.schema
    }

    pub fn is_all_categorical(&self) -> bool {
        self.schema.iter().all(|k| k.is_categorical())
    }

    pub fn has_continuous(&self) -> bool {
        self.schema.iter().any(|k| !k.is_categorical())
    }

    /// New dataset holding the given instances, in index order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let n = self.feature_count();
        let mut features = Vec::with_capacity(indices.len() * n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(features, labels, self.schema.clone(), self.class_count)
    }
}

/// A normalized distribution over the r class labels for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPosterior {
    probs: Vec<f64>,
}

impl ClassPosterior {
    const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidArgument(
                "posterior needs at least two classes".into(),
            ));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "posterior entries must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "posterior sums to {sum}, not 1"
            )));
        }
        Ok(ClassPosterior { probs })
    }

    /// Normalizes non-negative weights into a posterior.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, cannot normalize"
            )));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// Normalizes unnormalized log scores via max-subtraction.
    ///
    /// If every score is -inf the posterior falls back to uniform.
    pub fn from_log_scores(scores: &[f64]) -> Self {
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            let r = scores.len();
            return ClassPosterior {
                probs: vec![1.0 / r as f64; r],
            };
        }
        let mut probs: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        ClassPosterior { probs }
    }

    pub fn one_hot(class_count: usize, label: usize) -> Self {
        let mut probs = vec![0.0; class_count];
        probs[label - 1] = 1.0;
        ClassPosterior { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn class_count(&self) -> usize {
        self.probs.len()
    }

    /// Probability of the (1-based) label.
    pub fn prob(&self, label: usize) -> f64 {
        self.probs[label - 1]
    }

    /// Most probable label (1-based); ties break toward the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best + 1
    }
}

/// Mean hard and soft 0-1 losses over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    /// Fraction of misclassified instances.
    pub error: f64,
    /// Mean soft 0-1 loss, `1 - p_h(y|x)` averaged over instances.
    pub soft_error: f64,
}

/// Soft 0-1 loss of a posterior at the true label: `1 - p(y|x)`.
pub fn soft_loss(posterior: &ClassPosterior, true_label: usize) -> Result<f64> {
    check_label(posterior, true_label)?;
    Ok(1.0 - posterior.prob(true_label))
}

/// Hard 0-1 loss: 0 iff the argmax label equals the true label.
pub fn hard_loss(posterior: &ClassPosterior, true_label: usize) -> Result<f64> {
    check_label(posterior, true_label)?;
    Ok(if posterior.argmax() == true_label {
        0.0
    } else {
        1.0
    })
}

fn check_label(posterior: &ClassPosterior, label: usize) -> Result<()> {
    if label < 1 || label > posterior.class_count() {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside 1..={}",
            posterior.class_count()
        )));
    }
    Ok(())
}

/// Identifies the block structure of a statistics vector.
#[derive(Debug, Clone, PartialEq)]
pub enum StatsLayout {
    /// Per-class count plus per-feature per-value counts (naive Bayes).
    Categorical {
        classes: usize,
        cardinalities: Vec<usize>,
    },
    /// Per-class count, sum vector and optional second-moment matrix
    /// (QDA keeps the second moment, the toy model does not).
    Moments {
        classes: usize,
        dim: usize,
        second_moment: bool,
    },
}

impl StatsLayout {
    pub fn classes(&self) -> usize {
        match self {
            StatsLayout::Categorical { classes, .. } => *classes,
            StatsLayout::Moments { classes, .. } => *classes,
        }
    }

    fn first_len(&self) -> usize {
        match self {
            StatsLayout::Categorical { cardinalities, .. } => cardinalities.iter().sum(),
            StatsLayout::Moments { dim, .. } => *dim,
        }
    }

    fn has_second(&self) -> bool {
        matches!(
            self,
            StatsLayout::Moments {
                second_moment: true,
                ..
            }
        )
    }
}

/// One class block of additive sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    /// Zeroth-order statistic s0,y. May be non-integral or transiently
    /// near zero during calibration.
    pub count: f64,
    pub first: DVector<f64>,
    pub second: Option<DMatrix<f64>>,
}

/// Class-blocked additive sufficient statistics s.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticsVector {
    layout: StatsLayout,
    blocks: Vec<ClassBlock>,
}

impl StatisticsVector {
    pub fn zeros(layout: StatsLayout) -> Self {
        let first_len = layout.first_len();
        let blocks = (0..layout.classes())
            .map(|_| ClassBlock {
                count: 0.0,
                first: DVector::zeros(first_len),
                second: if layout.has_second() {
                    let d = match &layout {
                        StatsLayout::Moments { dim, .. } => *dim,
                        _ => unreachable!(),
                    };
                    Some(DMatrix::zeros(d, d))
                } else {
                    None
                },
            })
            .collect();
        StatisticsVector { layout, blocks }
    }

    pub fn layout(&self) -> &StatsLayout {
        &self.layout
    }

    pub fn class_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, class_index: usize) -> &ClassBlock {
        &self.blocks[class_index]
    }

    pub fn blocks(&self) -> &[ClassBlock] {
        &self.blocks
    }

    pub(crate) fn block_mut(&mut self, class_index: usize) -> &mut ClassBlock {
        &mut self.blocks[class_index]
    }

    /// Sum of the per-class counts; the equivalent sample size.
    pub fn total_count(&self) -> f64 {
        self.blocks.iter().map(|b| b.count).sum()
    }

    /// Elementwise `self + scale * other`. Layouts must match.
    pub fn add_scaled(&self, other: &StatisticsVector, scale: f64) -> Result<StatisticsVector> {
        if self.layout != other.layout {
            return Err(Error::Layout(
                "cannot combine statistics with different layouts".into(),
            ));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| ClassBlock {
                count: a.count + scale * b.count,
                first: &a.first + &b.first * scale,
                second: match (&a.second, &b.second) {
                    (Some(ma), Some(mb)) => Some(ma + mb * scale),
                    _ => None,
                },
            })
            .collect();
        Ok(StatisticsVector {
            layout: self.layout.clone(),
            blocks,
        })
    }

    /// Largest |M - M^T| entry over all second-moment blocks.
    pub fn max_second_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in &self.blocks {
            if let Some(m) = &b.second {
                for i in 0..m.nrows() {
                    for j in (i + 1)..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Flattens the count and first-moment entries class by class.
    /// Second-moment blocks are not included.
    pub fn count_and_first_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(b.count);
            out.extend(b.first.iter().cloned());
        }
        out
    }
}

/// `a + scale * b`, preserving the block layout.
pub fn stats_add_scaled(
    a: &StatisticsVector,
    b: &StatisticsVector,
    scale: f64,
) -> Result<StatisticsVector> {
    a.add_scaled(b, scale)
}
