//! Projected gradient descent on the average log loss, with both models
//! expressed in exponential-family natural parameters.

use nalgebra::{DMatrix, DVector};

use super::simplex::project_simplex;
use crate::data::{ClassPosterior, Dataset};
use crate::error::{Error, Result};
use crate::learner::{losses_from_posteriors, ClosedFormLearner};
use crate::nb::{NbLearner, NbParameters};
use crate::qda::{QdaLearner, QdaParameters, PSD_FLOOR};
use crate::rc::{CalibrationMode, FitTrace, IterationRecord};
use crate::Estimator;

/// Cap on repaired variances when a gradient step drives a natural
/// parameter block toward singularity.
const VARIANCE_CAP: f64 = 1e12;

/// Gradient descent settings. A zero learning rate leaves the model fixed.
#[derive(Debug, Clone)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub mode: CalibrationMode,
}

impl GdConfig {
    pub fn new(learning_rate: f64, iterations: usize, mode: CalibrationMode) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be non-negative, got {learning_rate}"
            )));
        }
        Ok(GdConfig {
            learning_rate,
            iterations,
            mode,
        })
    }
}

/// Naive Bayes natural parameters: log class prior and log conditionals.
/// The same shape also carries gradients with respect to them.
#[derive(Debug, Clone)]
pub struct NbNaturalParams {
    pub eta0: Vec<f64>,
    /// tables[feature][class][value]
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl NbNaturalParams {
    pub fn from_parameters(params: &NbParameters) -> Self {
        NbNaturalParams {
            eta0: params.class_prior().iter().map(|p| p.ln()).collect(),
            tables: (0..params.feature_count())
                .map(|i| {
                    params
                        .cond_table(i)
                        .iter()
                        .map(|row| row.iter().map(|p| p.ln()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Exponentiates and projects every distribution onto its simplex.
    pub fn project(&self) -> Result<NbParameters> {
        let prior = project_simplex(&self.eta0.iter().map(|e| e.exp()).collect::<Vec<_>>());
        let tables = self
            .tables
            .iter()
            .map(|table| {
                table
                    .iter()
                    .map(|row| {
                        project_simplex(&row.iter().map(|e| e.exp()).collect::<Vec<_>>())
                    })
                    .collect()
            })
            .collect();
        NbParameters::new(prior, tables)
    }

    fn step(&mut self, gradient: &NbNaturalParams, learning_rate: f64) {
        for (e, g) in self.eta0.iter_mut().zip(&gradient.eta0) {
            *e -= learning_rate * g;
        }
        for (table, gtable) in self.tables.iter_mut().zip(&gradient.tables) {
            for (row, grow) in table.iter_mut().zip(gtable) {
                for (e, g) in row.iter_mut().zip(grow) {
                    *e -= learning_rate * g;
                }
            }
        }
    }
}

fn nb_gradient_from_posteriors(
    data: &Dataset,
    posteriors: &[ClassPosterior],
    cardinalities: &[usize],
) -> NbNaturalParams {
    let m = data.instance_count() as f64;
    let r = data.class_count();
    let mut eta0 = vec![0.0; r];
    let mut tables: Vec<Vec<Vec<f64>>> = cardinalities
        .iter()
        .map(|&c| vec![vec![0.0; c]; r])
        .collect();
    for i in 0..data.instance_count() {
        let truth = data.label(i) - 1;
        for y in 0..r {
            let w = posteriors[i].prob(y + 1) - if y == truth { 1.0 } else { 0.0 };
            eta0[y] += w;
            for (j, table) in tables.iter_mut().enumerate() {
                let value = data.row(i)[j] as usize;
                table[y][value - 1] += w;
            }
        }
    }
    for e in &mut eta0 {
        *e /= m;
    }
    for table in &mut tables {
        for row in table {
            for e in row {
                *e /= m;
            }
        }
    }
    NbNaturalParams { eta0, tables }
}

/// Gradient of the average log loss with respect to the naive Bayes
/// natural parameters, evaluated at the given model.
pub fn nb_log_loss_gradient(data: &Dataset, params: &NbParameters) -> Result<NbNaturalParams> {
    let learner = NbLearner::new(Estimator::Ml);
    learner.check_compatible(params, data)?;
    let posteriors = learner.posteriors(params, data);
    Ok(nb_gradient_from_posteriors(
        data,
        &posteriors,
        &params.cardinalities(),
    ))
}

/// Projected gradient descent for naive Bayes starting from `init`.
pub fn gd_fit_nb(
    data: &Dataset,
    init: &NbParameters,
    config: &GdConfig,
) -> Result<(NbParameters, FitTrace)> {
    let learner = NbLearner::new(Estimator::Ml);
    learner.check_compatible(init, data)?;
    let cardinalities = init.cardinalities();

    let mut params = init.clone();
    let mut posteriors = learner.posteriors(&params, data);
    let mut record = losses_from_posteriors(&posteriors, data.labels());
    let mut records = vec![IterationRecord {
        soft_error: record.soft_error,
        error: record.error,
    }];
    let mut best = (record.soft_error, params.clone());

    for _t in 1..=config.iterations {
        let gradient = nb_gradient_from_posteriors(data, &posteriors, &cardinalities);
        let mut eta = NbNaturalParams::from_parameters(&params);
        eta.step(&gradient, config.learning_rate);
        let next = eta.project()?;
        posteriors = learner.posteriors(&next, data);
        let next_record = losses_from_posteriors(&posteriors, data.labels());
        records.push(IterationRecord {
            soft_error: next_record.soft_error,
            error: next_record.error,
        });
        if config.mode == CalibrationMode::StrictStop && next_record.soft_error > record.soft_error
        {
            return Ok((params, FitTrace::from_records(records, None)));
        }
        if next_record.soft_error < best.0 {
            best = (next_record.soft_error, next.clone());
        }
        params = next;
        record = next_record;
    }

    let chosen = match config.mode {
        CalibrationMode::StrictStop => params,
        CalibrationMode::BestTracking => best.1,
    };
    Ok((chosen, FitTrace::from_records(records, None)))
}

/// QDA natural parameters: log prior, precision-scaled means and the
/// negative half precision matrices. Also used as a gradient container.
#[derive(Debug, Clone)]
pub struct QdaNaturalParams {
    pub eta0: Vec<f64>,
    pub eta1: Vec<DVector<f64>>,
    pub eta2: Vec<DMatrix<f64>>,
}

impl QdaNaturalParams {
    pub fn from_parameters(params: &QdaParameters) -> Self {
        let r = params.class_count();
        let mut eta0 = Vec::with_capacity(r);
        let mut eta1 = Vec::with_capacity(r);
        let mut eta2 = Vec::with_capacity(r);
        for y in 0..r {
            let precision = params.precision(y);
            eta0.push(params.class_prior()[y].ln());
            eta1.push(&precision * params.mean(y));
            eta2.push(precision * -0.5);
        }
        QdaNaturalParams { eta0, eta1, eta2 }
    }

    /// Converts back to distribution parameters: the prior by
    /// exponentiation and simplex projection, each covariance by inverting
    /// eta2 with its eigenvalues floored so the result stays well
    /// conditioned, and each mean through the repaired covariance.
    pub fn project(&self, floor: f64) -> Result<QdaParameters> {
        let prior = project_simplex(&self.eta0.iter().map(|e| e.exp()).collect::<Vec<_>>());
        let mut means = Vec::with_capacity(self.eta1.len());
        let mut covariances = Vec::with_capacity(self.eta2.len());
        for (y, raw) in self.eta2.iter().enumerate() {
            let sym = (raw + raw.transpose()) * 0.5;
            for i in 0..sym.nrows() {
                for j in 0..sym.ncols() {
                    if !sym[(i, j)].is_finite() {
                        return Err(Error::DegenerateStatistics(format!(
                            "class {y} natural parameters are not finite"
                        )));
                    }
                }
            }
            // Sigma = -1/2 eta2^{-1} through the eigensystem of eta2; a
            // near-singular block maps to a capped variance instead of
            // overflowing, then the usual floor applies.
            let eigen = sym.symmetric_eigen();
            let variances = eigen
                .eigenvalues
                .map(|l| (-0.5 / l.min(-0.5 / VARIANCE_CAP)).max(floor));
            let rebuilt = &eigen.eigenvectors
                * DMatrix::from_diagonal(&variances)
                * eigen.eigenvectors.transpose();
            let cov = (&rebuilt + rebuilt.transpose()) * 0.5;
            means.push(&cov * &self.eta1[y]);
            covariances.push(cov);
        }
        QdaParameters::from_repaired(prior, means, covariances)
    }

    fn step(&mut self, gradient: &QdaNaturalParams, learning_rate: f64) {
        for (e, g) in self.eta0.iter_mut().zip(&gradient.eta0) {
            *e -= learning_rate * g;
        }
        for (e, g) in self.eta1.iter_mut().zip(&gradient.eta1) {
            e.axpy(-learning_rate, g, 1.0);
        }
        for (e, g) in self.eta2.iter_mut().zip(&gradient.eta2) {
            *e += g * -learning_rate;
        }
    }
}

fn qda_gradient_from_posteriors(
    data: &Dataset,
    posteriors: &[ClassPosterior],
    params: &QdaParameters,
) -> QdaNaturalParams {
    let m = data.instance_count() as f64;
    let n = data.feature_count();
    let r = data.class_count();
    let mut eta0 = vec![0.0; r];
    let mut weighted_x = vec![DVector::<f64>::zeros(n); r];
    let mut weighted_xx = vec![DMatrix::<f64>::zeros(n, n); r];
    for i in 0..data.instance_count() {
        let x = DVector::from_column_slice(data.row(i));
        let truth = data.label(i) - 1;
        for y in 0..r {
            let w = posteriors[i].prob(y + 1) - if y == truth { 1.0 } else { 0.0 };
            eta0[y] += w;
            weighted_x[y].axpy(w, &x, 1.0);
            weighted_xx[y].ger(w, &x, &x, 1.0);
        }
    }
    let mut eta1 = Vec::with_capacity(r);
    let mut eta2 = Vec::with_capacity(r);
    // eta0 still holds the raw per-class weight sums here
    for y in 0..r {
        let mu = params.mean(y);
        // E[x] = mu and E[x x^T] = Sigma + mu mu^T under class y
        let g1 = (&weighted_x[y] - mu * eta0[y]) / m;
        let mut expected_xx = params.covariance(y).clone();
        expected_xx.ger(1.0, mu, mu, 1.0);
        let g2 = (&weighted_xx[y] - expected_xx * eta0[y]) / m;
        eta1.push(g1);
        eta2.push(g2);
    }
    for e in &mut eta0 {
        *e /= m;
    }
    QdaNaturalParams { eta0, eta1, eta2 }
}

/// Gradient of the average log loss with respect to the QDA natural
/// parameters, evaluated at the given model.
pub fn qda_log_loss_gradient(data: &Dataset, params: &QdaParameters) -> Result<QdaNaturalParams> {
    let learner = QdaLearner::new(Estimator::Ml);
    learner.check_compatible(params, data)?;
    let posteriors = learner.posteriors(params, data);
    Ok(qda_gradient_from_posteriors(data, &posteriors, params))
}

/// Projected gradient descent for QDA starting from `init`.
pub fn gd_fit_qda(
    data: &Dataset,
    init: &QdaParameters,
    config: &GdConfig,
) -> Result<(QdaParameters, FitTrace)> {
    let learner = QdaLearner::new(Estimator::Ml);
    learner.check_compatible(init, data)?;

    let mut params = init.clone();
    let mut posteriors = learner.posteriors(&params, data);
    let mut record = losses_from_posteriors(&posteriors, data.labels());
    let mut records = vec![IterationRecord {
        soft_error: record.soft_error,
        error: record.error,
    }];
    let mut best = (record.soft_error, params.clone());

    for t in 1..=config.iterations {
        let gradient = qda_gradient_from_posteriors(data, &posteriors, &params);
        let mut eta = QdaNaturalParams::from_parameters(&params);
        eta.step(&gradient, config.learning_rate);
        let next = eta
            .project(PSD_FLOOR)
            .map_err(|e| Error::at_iteration(t, e))?;
        posteriors = learner.posteriors(&next, data);
        let next_record = losses_from_posteriors(&posteriors, data.labels());
        records.push(IterationRecord {
            soft_error: next_record.soft_error,
            error: next_record.error,
        });
        if config.mode == CalibrationMode::StrictStop && next_record.soft_error > record.soft_error
        {
            return Ok((params, FitTrace::from_records(records, None)));
        }
        if next_record.soft_error < best.0 {
            best = (next_record.soft_error, next.clone());
        }
        params = next;
        record = next_record;
    }

    let chosen = match config.mode {
        CalibrationMode::StrictStop => params,
        CalibrationMode::BestTracking => best.1,
    };
    Ok((chosen, FitTrace::from_records(records, None)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureKind;
    use crate::nb::nb_statistics;
    use crate::nb::nb_weighted_statistics;
    use approx::assert_abs_diff_eq;

    fn cfg(lr: f64, iterations: usize) -> GdConfig {
        GdConfig::new(lr, iterations, CalibrationMode::BestTracking).unwrap()
    }

    #[test]
    fn nb_eta0_gradient_single_instance() {
        // uniform model gives posterior (0.5, 0.5); with true label 1 the
        // prior gradient contribution is (-0.5, +0.5)
        let data = Dataset::new(
            vec![1.0],
            vec![1],
            vec![FeatureKind::Categorical { cardinality: 2 }],
            2,
        )
        .unwrap();
        let params = NbParameters::new(
            vec![0.5, 0.5],
            vec![vec![vec![0.5, 0.5], vec![0.5, 0.5]]],
        )
        .unwrap();
        let g = nb_log_loss_gradient(&data, &params).unwrap();
        assert_abs_diff_eq!(g.eta0[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.eta0[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn nb_gradient_equals_stats_gap() {
        // gradient coordinates are (s(X,h) - s(X,Y)) / m
        let data = Dataset::new(
            vec![1.0, 2.0, 2.0, 1.0, 2.0, 2.0],
            vec![1, 2, 1],
            vec![
                FeatureKind::Categorical { cardinality: 2 },
                FeatureKind::Categorical { cardinality: 2 },
            ],
            2,
        )
        .unwrap();
        let params = crate::nb::nb_ml_params(&nb_statistics(&data).unwrap()).unwrap();
        let learner = NbLearner::new(Estimator::Ml);
        let posts = learner.posteriors(&params, &data);
        let g = nb_log_loss_gradient(&data, &params).unwrap();
        let s_xy = nb_statistics(&data).unwrap();
        let s_xh = nb_weighted_statistics(&data, &posts).unwrap();
        let m = data.instance_count() as f64;
        for y in 0..2 {
            let want = (s_xh.block(y).count - s_xy.block(y).count) / m;
            assert_abs_diff_eq!(g.eta0[y], want, epsilon = 1e-12);
            for k in 0..2 {
                let want = (s_xh.block(y).first[k] - s_xy.block(y).first[k]) / m;
                assert_abs_diff_eq!(g.tables[0][y][k], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn nb_one_hot_posteriors_freeze_the_model() {
        // deterministic tables with exact zeros give exactly one-hot
        // posteriors, so the gradient vanishes and projection keeps zeros
        let data = Dataset::new(
            vec![1.0, 2.0],
            vec![1, 2],
            vec![FeatureKind::Categorical { cardinality: 2 }],
            2,
        )
        .unwrap();
        let params = NbParameters::new(
            vec![0.5, 0.5],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        )
        .unwrap();
        let (out, trace) = gd_fit_nb(&data, &params, &cfg(0.5, 5)).unwrap();
        assert_eq!(out.class_prior(), params.class_prior());
        assert_eq!(out.cond_table(0), params.cond_table(0));
        assert_eq!(trace.records[0].soft_error, 0.0);
    }

    #[test]
    fn nb_zero_learning_rate_is_identity() {
        let data = Dataset::new(
            vec![1.0, 2.0, 1.0],
            vec![1, 2, 2],
            vec![FeatureKind::Categorical { cardinality: 2 }],
            2,
        )
        .unwrap();
        let init = crate::nb::nb_ml_params(&nb_statistics(&data).unwrap()).unwrap();
        let (out, _) = gd_fit_nb(&data, &init, &cfg(0.0, 3)).unwrap();
        for y in 0..2 {
            assert_abs_diff_eq!(
                out.class_prior()[y],
                init.class_prior()[y],
                epsilon = 1e-12
            );
            for v in 0..2 {
                assert_abs_diff_eq!(
                    out.cond_table(0)[y][v],
                    init.cond_table(0)[y][v],
                    epsilon = 1e-12
                );
            }
        }
    }

    fn small_qda() -> (Dataset, QdaParameters) {
        let data = Dataset::new(
            vec![0.0, 0.5, 1.0, -0.5, 3.0, 2.5, 4.0, 3.5],
            vec![1, 1, 2, 2],
            vec![FeatureKind::Continuous, FeatureKind::Continuous],
            2,
        )
        .unwrap();
        let params =
            crate::qda::qda_ml_params(&crate::qda::qda_statistics(&data).unwrap()).unwrap();
        (data, params)
    }

    #[test]
    fn qda_zero_learning_rate_is_identity() {
        let (data, init) = small_qda();
        let (out, _) = gd_fit_qda(&data, &init, &cfg(0.0, 3)).unwrap();
        for y in 0..2 {
            assert_abs_diff_eq!(out.mean(y)[0], init.mean(y)[0], epsilon = 1e-9);
            for a in 0..2 {
                for b in 0..2 {
                    assert_abs_diff_eq!(
                        out.covariance(y)[(a, b)],
                        init.covariance(y)[(a, b)],
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn qda_one_hot_posteriors_give_zero_gradient() {
        // two far-apart classes: posteriors underflow to exact one-hots
        let data = Dataset::new(
            vec![0.0, 0.1, 1000.0, 1000.1],
            vec![1, 1, 2, 2],
            vec![FeatureKind::Continuous],
            2,
        )
        .unwrap();
        let params =
            crate::qda::qda_ml_params(&crate::qda::qda_statistics(&data).unwrap()).unwrap();
        let g = qda_log_loss_gradient(&data, &params).unwrap();
        for y in 0..2 {
            assert_eq!(g.eta0[y], 0.0);
            assert_eq!(g.eta1[y][0], 0.0);
            assert_eq!(g.eta2[y][(0, 0)], 0.0);
        }
    }

    #[test]
    fn qda_natural_round_trip() {
        let (_, params) = small_qda();
        let eta = QdaNaturalParams::from_parameters(&params);
        let back = eta.project(PSD_FLOOR).unwrap();
        for y in 0..2 {
            assert_abs_diff_eq!(
                back.class_prior()[y],
                params.class_prior()[y],
                epsilon = 1e-9
            );
            for a in 0..2 {
                assert_abs_diff_eq!(back.mean(y)[a], params.mean(y)[a], epsilon = 1e-9);
                for b in 0..2 {
                    assert_abs_diff_eq!(
                        back.covariance(y)[(a, b)],
                        params.covariance(y)[(a, b)],
                        epsilon = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn qda_projection_caps_singular_blocks() {
        let mut eta = QdaNaturalParams::from_parameters(&small_qda().1);
        // drive one block to exact singularity
        eta.eta2[0][(0, 0)] = 0.0;
        eta.eta2[0][(0, 1)] = 0.0;
        eta.eta2[0][(1, 0)] = 0.0;
        let out = eta.project(PSD_FLOOR).unwrap();
        let eigen = out.covariance(0).clone().symmetric_eigen();
        for &l in eigen.eigenvalues.iter() {
            assert!(l >= PSD_FLOOR - 1e-10);
            assert!(l <= VARIANCE_CAP * 1.01);
        }
    }

    #[test]
    fn gd_best_tracking_never_worse_than_init() {
        let (data, init) = small_qda();
        let (out, trace) = gd_fit_qda(&data, &init, &cfg(0.1, 16)).unwrap();
        let learner = QdaLearner::new(Estimator::Ml);
        let posts = learner.posteriors(&out, &data);
        let losses = losses_from_posteriors(&posts, data.labels());
        assert!(losses.soft_error <= trace.records[0].soft_error + 1e-12);
    }
}
