//! Quadratic discriminant analysis: moment statistics, ML and MAP parameter
//! mappings, covariance repair and log-space posterior inference.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::{ClassPosterior, Dataset, StatisticsVector, StatsLayout};
use crate::error::{Error, Result};
use crate::learner::{ClosedFormLearner, Estimator};
use crate::nb::{check_posteriors, COUNT_FLOOR};

/// Eigenvalue floor used when repairing covariance matrices.
pub const PSD_FLOOR: f64 = 1e-2;

const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Fitted QDA parameters: class prior, per-class mean vectors and repaired
/// covariance matrices, with cached factorizations for inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "QdaParametersData", into = "QdaParametersData")]
pub struct QdaParameters {
    class_prior: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    log_prior: Vec<f64>,
    chol: Vec<Cholesky<f64, Dyn>>,
    log_det: Vec<f64>,
}

/// Serialization layout: prior, means and row-major covariance rows.
#[derive(Serialize, Deserialize)]
struct QdaParametersData {
    prior: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

impl QdaParameters {
    /// Builds parameters, repairing every covariance to the PSD floor.
    pub fn new(
        class_prior: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let repaired = covariances
            .into_iter()
            .map(|c| psd_repair(&c, PSD_FLOOR))
            .collect::<Result<Vec<_>>>()?;
        Self::from_repaired(class_prior, means, repaired)
    }

    /// Builds parameters from covariances that are already positive
    /// definite; fails if a Cholesky factorization does not exist.
    pub fn from_repaired(
        class_prior: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let r = class_prior.len();
        if r < 2 || means.len() != r || covariances.len() != r {
            return Err(Error::InvalidArgument(
                "prior, means and covariances must agree on the class count".into(),
            ));
        }
        if class_prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "class prior has a negative or non-finite entry".into(),
            ));
        }
        let sum: f64 = class_prior.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "class prior sums to {sum}, not 1"
            )));
        }
        let n = means[0].len();
        let mut chol = Vec::with_capacity(r);
        let mut log_det = Vec::with_capacity(r);
        for (y, cov) in covariances.iter().enumerate() {
            if means[y].len() != n || cov.nrows() != n || cov.ncols() != n {
                return Err(Error::InvalidArgument(format!(
                    "class {y} mean or covariance has the wrong dimension"
                )));
            }
            let factor = cov.clone().cholesky().ok_or_else(|| {
                Error::DegenerateStatistics(format!(
                    "class {y} covariance is not positive definite"
                ))
            })?;
            let ld = 2.0 * factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            chol.push(factor);
            log_det.push(ld);
        }
        let log_prior = class_prior.iter().map(|p| p.ln()).collect();
        Ok(QdaParameters {
            class_prior,
            means,
            covariances,
            log_prior,
            chol,
            log_det,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_prior.len()
    }

    pub fn feature_count(&self) -> usize {
        self.means[0].len()
    }

    pub fn class_prior(&self) -> &[f64] {
        &self.class_prior
    }

    pub fn mean(&self, class_index: usize) -> &DVector<f64> {
        &self.means[class_index]
    }

    pub fn covariance(&self, class_index: usize) -> &DMatrix<f64> {
        &self.covariances[class_index]
    }

    /// Sigma^{-1} v through the cached factorization.
    pub fn solve(&self, class_index: usize, v: &DVector<f64>) -> DVector<f64> {
        self.chol[class_index].solve(v)
    }

    /// Full precision matrix Sigma^{-1}.
    pub fn precision(&self, class_index: usize) -> DMatrix<f64> {
        self.chol[class_index].inverse()
    }

    pub fn log_det(&self, class_index: usize) -> f64 {
        self.log_det[class_index]
    }
}

impl TryFrom<QdaParametersData> for QdaParameters {
    type Error = Error;

    fn try_from(data: QdaParametersData) -> Result<Self> {
        let means = data.means.into_iter().map(DVector::from_vec).collect();
        let covariances = data
            .covariances
            .into_iter()
            .map(|rows| {
                let n = rows.len();
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                if flat.len() != n * n {
                    return Err(Error::InvalidArgument(
                        "covariance rows are not square".into(),
                    ));
                }
                Ok(DMatrix::from_row_slice(n, n, &flat))
            })
            .collect::<Result<Vec<_>>>()?;
        // values are stored post-repair; re-repairing would perturb them
        QdaParameters::from_repaired(data.prior, means, covariances)
    }
}

impl From<QdaParameters> for QdaParametersData {
    fn from(params: QdaParameters) -> Self {
        QdaParametersData {
            prior: params.class_prior,
            means: params.means.iter().map(|m| m.as_slice().to_vec()).collect(),
            covariances: params
                .covariances
                .iter()
                .map(|c| {
                    (0..c.nrows())
                        .map(|i| c.row(i).iter().cloned().collect())
                        .collect()
                })
                .collect(),
        }
    }
}

/// Clamps every eigenvalue of a symmetric matrix to at least `floor` and
/// reconstructs, yielding a positive semi-definite matrix.
pub fn psd_repair(matrix: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    for i in 0..matrix.nrows() {
        for j in (i + 1)..matrix.ncols() {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let symmetric = (matrix + matrix.transpose()) * 0.5;
    let eigen = symmetric.symmetric_eigen();
    let clamped = eigen.eigenvalues.map(|v| v.max(floor));
    let rebuilt =
        &eigen.eigenvectors * DMatrix::from_diagonal(&clamped) * eigen.eigenvectors.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

fn moments_layout(data: &Dataset) -> Result<StatsLayout> {
    for (i, kind) in data.schema().iter().enumerate() {
        if kind.is_categorical() {
            return Err(Error::Schema(format!(
                "feature {i} is categorical; QDA requires continuous features"
            )));
        }
    }
    Ok(StatsLayout::Moments {
        classes: data.class_count(),
        dim: data.feature_count(),
        second_moment: true,
    })
}

/// Hard-label moment statistics: per class, count, sum of x and sum of x x^T.
pub fn qda_statistics(data: &Dataset) -> Result<StatisticsVector> {
    let mut stats = StatisticsVector::zeros(moments_layout(data)?);
    for i in 0..data.instance_count() {
        let x = DVector::from_column_slice(data.row(i));
        let block = stats.block_mut(data.label(i) - 1);
        block.count += 1.0;
        block.first += &x;
        block.second.as_mut().unwrap().ger(1.0, &x, &x, 1.0);
    }
    Ok(stats)
}

/// Posterior-weighted moment statistics s(X,h).
pub fn qda_weighted_statistics(
    data: &Dataset,
    posteriors: &[ClassPosterior],
) -> Result<StatisticsVector> {
    let layout = moments_layout(data)?;
    check_posteriors(data, posteriors)?;
    let mut stats = StatisticsVector::zeros(layout);
    for i in 0..data.instance_count() {
        let x = DVector::from_column_slice(data.row(i));
        for (y, &weight) in posteriors[i].probs().iter().enumerate() {
            let block = stats.block_mut(y);
            block.count += weight;
            block.first.axpy(weight, &x, 1.0);
            block.second.as_mut().unwrap().ger(weight, &x, &x, 1.0);
        }
    }
    Ok(stats)
}

struct ClassMoments {
    mass: f64,
    mean: DVector<f64>,
    covariance: DMatrix<f64>, // biased, before repair
}

fn sample_moments(stats: &StatisticsVector) -> Result<Vec<ClassMoments>> {
    match stats.layout() {
        StatsLayout::Moments {
            second_moment: true,
            ..
        } => {}
        _ => {
            return Err(Error::Layout(
                "QDA parameter mapping needs moment statistics with second moments".into(),
            ))
        }
    }
    stats
        .blocks()
        .iter()
        .enumerate()
        .map(|(y, block)| {
            if !block.count.is_finite() {
                return Err(Error::DegenerateStatistics(format!(
                    "class {y} count is {}",
                    block.count
                )));
            }
            let mass = block.count.max(COUNT_FLOOR);
            let mean = &block.first / mass;
            let second = block.second.as_ref().unwrap();
            let mut covariance = second / mass;
            covariance.ger(-1.0, &mean, &mean, 1.0);
            Ok(ClassMoments {
                mass,
                mean,
                covariance,
            })
        })
        .collect()
}

fn prior_from_counts(stats: &StatisticsVector, pseudo: f64) -> Result<Vec<f64>> {
    let counts: Vec<f64> = stats
        .blocks()
        .iter()
        .map(|b| b.count.max(COUNT_FLOOR) + pseudo)
        .collect();
    let sum: f64 = counts.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::DegenerateStatistics(format!(
            "class counts sum to {sum} after clamping"
        )));
    }
    Ok(counts.into_iter().map(|c| c / sum).collect())
}

/// Maximum likelihood parameter mapping: prior from counts, mean from the
/// first moment, biased covariance from the second, then PSD repair.
pub fn qda_ml_params(stats: &StatisticsVector) -> Result<QdaParameters> {
    let prior = prior_from_counts(stats, 0.0)?;
    let moments = sample_moments(stats)?;
    let (means, covs) = moments
        .into_iter()
        .map(|m| (m.mean, m.covariance))
        .unzip();
    QdaParameters::new(prior, means, covs)
}

/// Prior moments for the MAP mapping, with equivalent-sample-size weights.
#[derive(Debug, Clone)]
pub struct QdaMapPrior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Weight m1 of the prior mean.
    pub mean_weight: f64,
    /// Weight m2 of the prior covariance.
    pub cov_weight: f64,
}

impl QdaMapPrior {
    pub const DEFAULT_WEIGHT: f64 = 10.0;

    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        QdaMapPrior {
            mean,
            covariance,
            mean_weight: Self::DEFAULT_WEIGHT,
            cov_weight: Self::DEFAULT_WEIGHT,
        }
    }

    /// Data-scale-aware default: the class-unconditional mean and the
    /// diagonal of the class-unconditional covariance. Both are invariant
    /// across calibration iterations because per-coordinate class sums
    /// never change.
    pub fn from_statistics(stats: &StatisticsVector) -> Result<Self> {
        match stats.layout() {
            StatsLayout::Moments {
                second_moment: true,
                ..
            } => {}
            _ => {
                return Err(Error::Layout(
                    "global prior moments need moment statistics".into(),
                ))
            }
        }
        let total: f64 = stats.total_count();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateStatistics(format!(
                "total count is {total}"
            )));
        }
        let n = stats.block(0).first.len();
        let mut sum = DVector::zeros(n);
        let mut sum_sq = DMatrix::zeros(n, n);
        for block in stats.blocks() {
            sum += &block.first;
            sum_sq += block.second.as_ref().unwrap();
        }
        let mean = sum / total;
        let mut cov = sum_sq / total;
        cov.ger(-1.0, &mean, &mean, 1.0);
        let diag = DVector::from_iterator(n, cov.diagonal().iter().map(|v| v.max(0.0)));
        Ok(QdaMapPrior::new(mean, DMatrix::from_diagonal(&diag)))
    }
}

/// MAP parameter mapping: blends sample moments with prior moments using
/// their equivalent sample sizes; the class prior uses one pseudo-count per
/// class. PSD repair is applied last.
pub fn qda_map_params(stats: &StatisticsVector, prior: &QdaMapPrior) -> Result<QdaParameters> {
    if prior.mean_weight < 0.0 || prior.cov_weight < 0.0 {
        return Err(Error::InvalidArgument(
            "prior weights must be non-negative".into(),
        ));
    }
    let class_prior = prior_from_counts(stats, 1.0)?;
    let moments = sample_moments(stats)?;
    let mut means = Vec::with_capacity(moments.len());
    let mut covs = Vec::with_capacity(moments.len());
    for m in moments {
        let mean = (&prior.mean * prior.mean_weight + &m.mean * m.mass)
            / (prior.mean_weight + m.mass);
        let cov = (&prior.covariance * prior.cov_weight + &m.covariance * m.mass)
            / (prior.cov_weight + m.mass);
        means.push(mean);
        covs.push(cov);
    }
    QdaParameters::new(class_prior, means, covs)
}

/// Class posterior from Gaussian log joint densities, normalized in log
/// space. The shared (2 pi)^{-n/2} factor cancels in the normalization.
pub fn qda_posterior(params: &QdaParameters, instance: &[f64]) -> ClassPosterior {
    assert_eq!(
        instance.len(),
        params.feature_count(),
        "instance length does not match the model dimension"
    );
    let x = DVector::from_column_slice(instance);
    let scores: Vec<f64> = (0..params.class_count())
        .map(|y| {
            let diff = &x - params.mean(y);
            let quad = diff.dot(&params.solve(y, &diff));
            params.log_prior[y] - 0.5 * params.log_det(y) - 0.5 * quad
        })
        .collect();
    ClassPosterior::from_log_scores(&scores)
}

/// QDA as a closed-form learner. With the MAP estimator and no explicit
/// prior, global prior moments are derived from the statistics at hand.
#[derive(Debug, Clone)]
pub struct QdaLearner {
    pub estimator: Estimator,
    pub map_prior: Option<QdaMapPrior>,
}

impl QdaLearner {
    pub fn new(estimator: Estimator) -> Self {
        QdaLearner {
            estimator,
            map_prior: None,
        }
    }
}

impl ClosedFormLearner for QdaLearner {
    type Params = QdaParameters;

    fn statistics(&self, data: &Dataset) -> Result<StatisticsVector> {
        qda_statistics(data)
    }

    fn weighted_statistics(
        &self,
        data: &Dataset,
        posteriors: &[ClassPosterior],
    ) -> Result<StatisticsVector> {
        qda_weighted_statistics(data, posteriors)
    }

    fn parameters(&self, stats: &StatisticsVector) -> Result<QdaParameters> {
        match self.estimator {
            Estimator::Ml => qda_ml_params(stats),
            Estimator::Map => match &self.map_prior {
                Some(prior) => qda_map_params(stats, prior),
                None => qda_map_params(stats, &QdaMapPrior::from_statistics(stats)?),
            },
        }
    }

    fn posterior(&self, params: &QdaParameters, instance: &[f64]) -> ClassPosterior {
        qda_posterior(params, instance)
    }

    fn check_compatible(&self, params: &QdaParameters, data: &Dataset) -> Result<()> {
        if data.class_count() != params.class_count() {
            return Err(Error::Schema(format!(
                "dataset has {} classes, model {}",
                data.class_count(),
                params.class_count()
            )));
        }
        if data.feature_count() != params.feature_count() {
            return Err(Error::Schema(format!(
                "dataset has {} features, model {}",
                data.feature_count(),
                params.feature_count()
            )));
        }
        if let Some((i, _)) = data
            .schema()
            .iter()
            .enumerate()
            .find(|(_, k)| k.is_categorical())
        {
            return Err(Error::Schema(format!(
                "feature {i} is categorical; QDA requires continuous features"
            )));
        }
        Ok(())
    }
}
