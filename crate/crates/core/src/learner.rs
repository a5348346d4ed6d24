//! The closed-form learner abstraction: a statistics mapping paired with a
//! parameter mapping, plus posterior inference for the resulting model.

use serde::{Deserialize, Serialize};

use crate::data::{ClassPosterior, Dataset, LossSummary, StatisticsVector};
use crate::error::Result;

/// Closed-form estimator used by a parameter mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ml,
    Map,
}

/// A generative-classifier family whose learning algorithm decomposes into
/// a statistics mapping `s` and a parameter mapping `theta`.
///
/// `statistics` sums per-instance statistics over hard labels, while
/// `weighted_statistics` weights each instance's per-class contribution by a
/// posterior, yielding the probabilistic estimate s(X,h). Both produce the
/// same layout, so calibration can mix them freely.
pub trait ClosedFormLearner {
    type Params: Clone;

    /// Hard-label statistics s(X,Y).
    fn statistics(&self, data: &Dataset) -> Result<StatisticsVector>;

    /// Posterior-weighted statistics s(X,h).
    fn weighted_statistics(
        &self,
        data: &Dataset,
        posteriors: &[ClassPosterior],
    ) -> Result<StatisticsVector>;

    /// Parameter mapping theta(s).
    fn parameters(&self, stats: &StatisticsVector) -> Result<Self::Params>;

    /// Class posterior p(y|x) for one instance.
    fn posterior(&self, params: &Self::Params, instance: &[f64]) -> ClassPosterior;

    /// Checks that a dataset can be scored under the given parameters.
    fn check_compatible(&self, params: &Self::Params, data: &Dataset) -> Result<()>;

    /// The full closed-form algorithm theta(s(X,Y)).
    fn fit(&self, data: &Dataset) -> Result<Self::Params> {
        self.parameters(&self.statistics(data)?)
    }

    fn posteriors(&self, params: &Self::Params, data: &Dataset) -> Vec<ClassPosterior> {
        (0..data.instance_count())
            .map(|i| self.posterior(params, data.row(i)))
            .collect()
    }
}

/// Mean hard and soft losses of a fitted model over a dataset.
pub fn dataset_losses<L: ClosedFormLearner>(
    learner: &L,
    params: &L::Params,
    data: &Dataset,
) -> Result<LossSummary> {
    learner.check_compatible(params, data)?;
    let posteriors = learner.posteriors(params, data);
    Ok(losses_from_posteriors(&posteriors, data.labels()))
}

/// Aggregates losses when per-instance posteriors are already available.
pub fn losses_from_posteriors(posteriors: &[ClassPosterior], labels: &[usize]) -> LossSummary {
    let m = labels.len() as f64;
    let mut hard = 0.0;
    let mut soft = 0.0;
    for (p, &y) in posteriors.iter().zip(labels) {
        soft += 1.0 - p.prob(y);
        if p.argmax() != y {
            hard += 1.0;
        }
    }
    LossSummary {
        error: hard / m,
        soft_error: soft / m,
    }
}
