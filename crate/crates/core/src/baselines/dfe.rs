//! Discriminative frequency estimate for naive Bayes: each pass reinforces
//! the true-class statistics of every instance by its soft loss, never
//! subtracting from the other classes, so the equivalent sample size grows.

use crate::data::{ClassPosterior, Dataset, StatisticsVector};
use crate::error::{Error, Result};
use crate::learner::{losses_from_posteriors, ClosedFormLearner};
use crate::nb::{feature_offsets, nb_ml_params, nb_statistics, NbLearner, NbParameters};
use crate::rc::{FitTrace, IterationRecord};
use crate::Estimator;

/// Adds `(1 - p(y|x)) * s(x, y)` for every instance to the statistics.
pub(crate) fn dfe_pass(
    stats: &mut StatisticsVector,
    data: &Dataset,
    posteriors: &[ClassPosterior],
    offsets: &[usize],
) {
    for i in 0..data.instance_count() {
        let y = data.label(i);
        let weight = 1.0 - posteriors[i].prob(y);
        let block = stats.block_mut(y - 1);
        block.count += weight;
        for (j, &off) in offsets.iter().enumerate() {
            let value = data.row(i)[j] as usize;
            block.first[off + value - 1] += weight;
        }
    }
}

/// Runs the frequency-estimate calibration for `iterations` passes,
/// starting from the hard-label counting statistics, re-mapping via the
/// maximum likelihood parameters after each pass and returning the model
/// with the lowest training soft error.
pub fn dfe_fit(
    data: &Dataset,
    iterations: usize,
    snapshot_statistics: bool,
) -> Result<(NbParameters, FitTrace)> {
    if !data.is_all_categorical() {
        return Err(Error::UnsupportedFamily(
            "DFE supports naive Bayes over categorical features only".into(),
        ));
    }
    let learner = NbLearner::new(Estimator::Ml);
    let mut stats = nb_statistics(data)?;
    let cardinalities: Vec<usize> = data
        .schema()
        .iter()
        .map(|k| match k {
            crate::data::FeatureKind::Categorical { cardinality } => *cardinality,
            _ => unreachable!(),
        })
        .collect();
    let offsets = feature_offsets(&cardinalities);

    let mut params = nb_ml_params(&stats).map_err(|e| Error::at_iteration(0, e))?;
    let mut posteriors = learner.posteriors(&params, data);
    let record = losses_from_posteriors(&posteriors, data.labels());
    let mut records = vec![IterationRecord {
        soft_error: record.soft_error,
        error: record.error,
    }];
    let mut snapshots = snapshot_statistics.then(|| vec![stats.clone()]);
    let mut best = (record.soft_error, params.clone());

    for t in 1..=iterations {
        dfe_pass(&mut stats, data, &posteriors, &offsets);
        params = nb_ml_params(&stats).map_err(|e| Error::at_iteration(t, e))?;
        posteriors = learner.posteriors(&params, data);
        let rec = losses_from_posteriors(&posteriors, data.labels());
        records.push(IterationRecord {
            soft_error: rec.soft_error,
            error: rec.error,
        });
        if let Some(snaps) = snapshots.as_mut() {
            snaps.push(stats.clone());
        }
        if rec.soft_error < best.0 {
            best = (rec.soft_error, params.clone());
        }
    }

    Ok((best.1, FitTrace::from_records(records, snapshots)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, StatsLayout};
    use approx::assert_abs_diff_eq;

    fn categorical_data() -> Dataset {
        Dataset::new(
            vec![1.0, 2.0, 1.0, 2.0, 2.0, 1.0],
            vec![1, 2, 1, 2, 1, 2],
            vec![FeatureKind::Categorical { cardinality: 2 }],
            2,
        )
        .unwrap()
    }

    #[test]
    fn one_hot_posteriors_leave_statistics_unchanged() {
        let data = categorical_data();
        let mut stats = nb_statistics(&data).unwrap();
        let before = stats.clone();
        let posts: Vec<_> = data
            .labels()
            .iter()
            .map(|&y| ClassPosterior::one_hot(2, y))
            .collect();
        dfe_pass(&mut stats, &data, &posts, &feature_offsets(&[2]));
        assert_eq!(stats, before);
    }

    #[test]
    fn instance_added_with_its_soft_loss_weight() {
        let data = Dataset::new(
            vec![1.0, 2.0],
            vec![1, 2],
            vec![FeatureKind::Categorical { cardinality: 2 }],
            2,
        )
        .unwrap();
        let mut stats = StatisticsVector::zeros(StatsLayout::Categorical {
            classes: 2,
            cardinalities: vec![2],
        });
        let posts = vec![
            ClassPosterior::new(vec![0.6, 0.4]).unwrap(),
            ClassPosterior::new(vec![0.6, 0.4]).unwrap(),
        ];
        dfe_pass(&mut stats, &data, &posts, &feature_offsets(&[2]));
        // first instance: true class 1 with p = 0.6, weight 0.4
        assert_abs_diff_eq!(stats.block(0).count, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.block(0).first[0], 0.4, epsilon = 1e-12);
        // second instance: true class 2 with p = 0.4, weight 0.6
        assert_abs_diff_eq!(stats.block(1).count, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.block(1).first[1], 0.6, epsilon = 1e-12);
    }

    #[test]
    fn sample_size_grows_by_soft_error_each_pass() {
        let data = categorical_data();
        let m = data.instance_count() as f64;
        let (_, trace) = dfe_fit(&data, 8, true).unwrap();
        let snaps = trace.snapshots.as_ref().unwrap();
        for t in 1..snaps.len() {
            let grown = snaps[t].total_count() - snaps[t - 1].total_count();
            let expected = m * trace.records[t - 1].soft_error;
            assert!(
                (grown - expected).abs() <= 1e-9 * expected.abs().max(1.0),
                "pass {t}: grew {grown}, expected {expected}"
            );
            assert!(grown >= 0.0);
        }
    }

    #[test]
    fn continuous_schema_is_rejected() {
        let data = Dataset::new(
            vec![0.5, 1.5],
            vec![1, 2],
            vec![FeatureKind::Continuous],
            2,
        )
        .unwrap();
        assert!(matches!(
            dfe_fit(&data, 4, false),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn best_tracking_never_worse_than_initial() {
        let data = categorical_data();
        let (params, trace) = dfe_fit(&data, 16, false).unwrap();
        let learner = NbLearner::new(Estimator::Ml);
        let posts = learner.posteriors(&params, &data);
        let losses = losses_from_posteriors(&posts, data.labels());
        assert!(losses.soft_error <= trace.records[0].soft_error + 1e-12);
    }
}
