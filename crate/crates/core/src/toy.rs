//! The three-point univariate fixture and its two-parameter Gaussian
//! family: fixed equal priors, unit variances, class-dependent means.

use crate::data::{ClassPosterior, Dataset, FeatureKind, StatisticsVector, StatsLayout};
use crate::error::{Error, Result};
use crate::learner::ClosedFormLearner;
use crate::nb::{check_posteriors, COUNT_FLOOR};

/// Means of the two class-conditional Gaussians; everything else is fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyParameters {
    pub means: [f64; 2],
}

/// Gaussian mixture with two free means. The statistics are per-class
/// (count, sum) pairs and the parameter mapping is mean = sum / count.
#[derive(Debug, Clone, Copy, Default)]
pub struct ToyGaussianLearner;

fn toy_layout() -> StatsLayout {
    StatsLayout::Moments {
        classes: 2,
        dim: 1,
        second_moment: false,
    }
}

fn check_toy_schema(data: &Dataset) -> Result<()> {
    if data.class_count() != 2
        || data.feature_count() != 1
        || data.schema()[0] != FeatureKind::Continuous
    {
        return Err(Error::Schema(
            "toy family needs one continuous feature and two classes".into(),
        ));
    }
    Ok(())
}

impl ClosedFormLearner for ToyGaussianLearner {
    type Params = ToyParameters;

    fn statistics(&self, data: &Dataset) -> Result<StatisticsVector> {
        check_toy_schema(data)?;
        let mut stats = StatisticsVector::zeros(toy_layout());
        for i in 0..data.instance_count() {
            let block = stats.block_mut(data.label(i) - 1);
            block.count += 1.0;
            block.first[0] += data.row(i)[0];
        }
        Ok(stats)
    }

    fn weighted_statistics(
        &self,
        data: &Dataset,
        posteriors: &[ClassPosterior],
    ) -> Result<StatisticsVector> {
        check_toy_schema(data)?;
        check_posteriors(data, posteriors)?;
        let mut stats = StatisticsVector::zeros(toy_layout());
        for i in 0..data.instance_count() {
            let x = data.row(i)[0];
            for (y, &weight) in posteriors[i].probs().iter().enumerate() {
                let block = stats.block_mut(y);
                block.count += weight;
                block.first[0] += weight * x;
            }
        }
        Ok(stats)
    }

    fn parameters(&self, stats: &StatisticsVector) -> Result<ToyParameters> {
        if *stats.layout() != toy_layout() {
            return Err(Error::Layout(
                "toy parameter mapping needs two first-moment blocks".into(),
            ));
        }
        let mut means = [0.0; 2];
        for (y, mean) in means.iter_mut().enumerate() {
            let block = stats.block(y);
            if !block.count.is_finite() {
                return Err(Error::DegenerateStatistics(format!(
                    "class {y} count is {}",
                    block.count
                )));
            }
            *mean = block.first[0] / block.count.max(COUNT_FLOOR);
        }
        Ok(ToyParameters { means })
    }

    fn posterior(&self, params: &ToyParameters, instance: &[f64]) -> ClassPosterior {
        let x = instance[0];
        ClassPosterior::from_log_scores(&[
            -0.5 * (x - params.means[0]).powi(2),
            -0.5 * (x - params.means[1]).powi(2),
        ])
    }

    fn check_compatible(&self, _params: &ToyParameters, data: &Dataset) -> Result<()> {
        check_toy_schema(data)
    }
}

/// The three training points X = (0, 1, 4) with labels (1, 2, 2), paired
/// with the two-parameter Gaussian family.
pub fn toy_fixture() -> (Dataset, ToyGaussianLearner) {
    let data = Dataset::new(
        vec![0.0, 1.0, 4.0],
        vec![1, 2, 2],
        vec![FeatureKind::Continuous],
        2,
    )
    .expect("fixture is valid");
    (data, ToyGaussianLearner)
}

/// Decision boundary of a toy model: with equal priors and unit variances
/// it sits halfway between the two means.
pub fn toy_decision_boundary(params: &ToyParameters) -> f64 {
    0.5 * (params.means[0] + params.means[1])
}
