//! Discrete naive Bayes: class-conditional counting statistics, ML and MAP
//! parameter mappings, and log-space posterior inference.

use serde::{Deserialize, Serialize};

use crate::data::{ClassPosterior, Dataset, FeatureKind, StatisticsVector, StatsLayout};
use crate::error::{Error, Result};
use crate::learner::{ClosedFormLearner, Estimator};

/// Floor applied to each count cell before normalization. Calibration can
/// push counts negative or to zero; the floor keeps the mapped parameters
/// valid without touching the statistics themselves.
pub const COUNT_FLOOR: f64 = 1e-6;

/// Fitted naive Bayes parameters: a class prior and, per feature and class,
/// a categorical conditional distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NbParametersData", into = "NbParametersData")]
pub struct NbParameters {
    class_prior: Vec<f64>,
    /// cond_tables[feature][class][value]
    cond_tables: Vec<Vec<Vec<f64>>>,
    log_prior: Vec<f64>,
    log_tables: Vec<Vec<Vec<f64>>>,
}

/// Flat serialization layout: schema (cardinalities), prior and tables.
#[derive(Serialize, Deserialize)]
struct NbParametersData {
    cardinalities: Vec<usize>,
    class_prior: Vec<f64>,
    cond_tables: Vec<Vec<Vec<f64>>>,
}

impl NbParameters {
    const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(class_prior: Vec<f64>, cond_tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        check_simplex(&class_prior, "class prior")?;
        for (i, table) in cond_tables.iter().enumerate() {
            if table.len() != class_prior.len() {
                return Err(Error::InvalidArgument(format!(
                    "feature {i} table has {} class rows, expected {}",
                    table.len(),
                    class_prior.len()
                )));
            }
            let card = table[0].len();
            for (y, row) in table.iter().enumerate() {
                if row.len() != card {
                    return Err(Error::InvalidArgument(format!(
                        "feature {i} class {y} row length differs within the table"
                    )));
                }
                check_simplex(row, &format!("feature {i} conditional"))?;
            }
        }
        let log_prior = class_prior.iter().map(|p| p.ln()).collect();
        let log_tables = cond_tables
            .iter()
            .map(|t| {
                t.iter()
                    .map(|row| row.iter().map(|p| p.ln()).collect())
                    .collect()
            })
            .collect();
        Ok(NbParameters {
            class_prior,
            cond_tables,
            log_prior,
            log_tables,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_prior.len()
    }

    pub fn feature_count(&self) -> usize {
        self.cond_tables.len()
    }

    pub fn class_prior(&self) -> &[f64] {
        &self.class_prior
    }

    /// p(x_i = value | y) table for one feature, indexed [class][value].
    pub fn cond_table(&self, feature: usize) -> &[Vec<f64>] {
        &self.cond_tables[feature]
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.cond_tables.iter().map(|t| t[0].len()).collect()
    }

    pub(crate) fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    pub(crate) fn log_tables(&self) -> &[Vec<Vec<f64>>] {
        &self.log_tables
    }
}

fn check_simplex(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} is empty")));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NbParameters::SUM_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "{what} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

impl TryFrom<NbParametersData> for NbParameters {
    type Error = Error;

    fn try_from(data: NbParametersData) -> Result<Self> {
        let params = NbParameters::new(data.class_prior, data.cond_tables)?;
        if params.cardinalities() != data.cardinalities {
            return Err(Error::InvalidArgument(
                "cardinalities do not match the conditional tables".into(),
            ));
        }
        Ok(params)
    }
}

impl From<NbParameters> for NbParametersData {
    fn from(params: NbParameters) -> Self {
        NbParametersData {
            cardinalities: params.cardinalities(),
            class_prior: params.class_prior,
            cond_tables: params.cond_tables,
        }
    }
}

fn categorical_layout(data: &Dataset) -> Result<StatsLayout> {
    let mut cardinalities = Vec::with_capacity(data.feature_count());
    for (i, kind) in data.schema().iter().enumerate() {
        match kind {
            FeatureKind::Categorical { cardinality } => cardinalities.push(*cardinality),
            FeatureKind::Continuous => {
                return Err(Error::Schema(format!(
                    "feature {i} is continuous; naive Bayes requires categorical features"
                )))
            }
        }
    }
    Ok(StatsLayout::Categorical {
        classes: data.class_count(),
        cardinalities,
    })
}

pub(crate) fn feature_offsets(cardinalities: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(cardinalities.len());
    let mut acc = 0;
    for &c in cardinalities {
        offsets.push(acc);
        acc += c;
    }
    offsets
}

/// Hard-label counting statistics s(X,Y).
pub fn nb_statistics(data: &Dataset) -> Result<StatisticsVector> {
    let layout = categorical_layout(data)?;
    let offsets = match &layout {
        StatsLayout::Categorical { cardinalities, .. } => feature_offsets(cardinalities),
        _ => unreachable!(),
    };
    let mut stats = StatisticsVector::zeros(layout);
    for i in 0..data.instance_count() {
        let block = stats.block_mut(data.label(i) - 1);
        block.count += 1.0;
        for (j, &off) in offsets.iter().enumerate() {
            let value = data.row(i)[j] as usize;
            block.first[off + value - 1] += 1.0;
        }
    }
    Ok(stats)
}

/// Posterior-weighted statistics s(X,h): every instance contributes its
/// one-hot feature counts to each class block, scaled by the posterior.
pub fn nb_weighted_statistics(
    data: &Dataset,
    posteriors: &[ClassPosterior],
) -> Result<StatisticsVector> {
    let layout = categorical_layout(data)?;
    check_posteriors(data, posteriors)?;
    let offsets = match &layout {
        StatsLayout::Categorical { cardinalities, .. } => feature_offsets(cardinalities),
        _ => unreachable!(),
    };
    let mut stats = StatisticsVector::zeros(layout);
    for i in 0..data.instance_count() {
        for (y, &weight) in posteriors[i].probs().iter().enumerate() {
            let block = stats.block_mut(y);
            block.count += weight;
            for (j, &off) in offsets.iter().enumerate() {
                let value = data.row(i)[j] as usize;
                block.first[off + value - 1] += weight;
            }
        }
    }
    Ok(stats)
}

pub(crate) fn check_posteriors(data: &Dataset, posteriors: &[ClassPosterior]) -> Result<()> {
    if posteriors.len() != data.instance_count() {
        return Err(Error::InvalidArgument(format!(
            "{} posteriors for {} instances",
            posteriors.len(),
            data.instance_count()
        )));
    }
    if let Some(p) = posteriors.iter().find(|p| p.class_count() != data.class_count()) {
        return Err(Error::InvalidArgument(format!(
            "posterior over {} classes, dataset has {}",
            p.class_count(),
            data.class_count()
        )));
    }
    Ok(())
}

fn clamped(cells: impl Iterator<Item = f64>) -> Vec<f64> {
    cells.map(|c| c.max(COUNT_FLOOR)).collect()
}

fn normalize(cells: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let sum: f64 = cells.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::DegenerateStatistics(format!(
            "{what} sums to {sum} after clamping"
        )));
    }
    Ok(cells.into_iter().map(|c| c / sum).collect())
}

fn layout_cardinalities(stats: &StatisticsVector) -> Result<&[usize]> {
    match stats.layout() {
        StatsLayout::Categorical { cardinalities, .. } => Ok(cardinalities),
        _ => Err(Error::Layout(
            "naive Bayes parameter mapping needs categorical statistics".into(),
        )),
    }
}

/// Maximum likelihood parameter mapping theta(s).
pub fn nb_ml_params(stats: &StatisticsVector) -> Result<NbParameters> {
    let cardinalities = layout_cardinalities(stats)?.to_vec();
    let offsets = feature_offsets(&cardinalities);
    let prior = normalize(
        clamped(stats.blocks().iter().map(|b| b.count)),
        "class counts",
    )?;
    let mut tables = Vec::with_capacity(cardinalities.len());
    for (i, (&off, &card)) in offsets.iter().zip(&cardinalities).enumerate() {
        let mut table = Vec::with_capacity(stats.class_count());
        for block in stats.blocks() {
            let cells = clamped(block.first.as_slice()[off..off + card].iter().cloned());
            table.push(normalize(cells, &format!("feature {i} marginal"))?);
        }
        tables.push(table);
    }
    NbParameters::new(prior, tables)
}

/// MAP parameter mapping with one pseudo-count per cell: the class prior
/// uses an equivalent sample size of r, each conditional one of r_i.
pub fn nb_map_params(stats: &StatisticsVector) -> Result<NbParameters> {
    let cardinalities = layout_cardinalities(stats)?.to_vec();
    let offsets = feature_offsets(&cardinalities);
    let prior = normalize(
        clamped(stats.blocks().iter().map(|b| b.count))
            .into_iter()
            .map(|c| c + 1.0)
            .collect(),
        "class counts",
    )?;
    let mut tables = Vec::with_capacity(cardinalities.len());
    for (i, (&off, &card)) in offsets.iter().zip(&cardinalities).enumerate() {
        let mut table = Vec::with_capacity(stats.class_count());
        for block in stats.blocks() {
            let cells: Vec<f64> = clamped(block.first.as_slice()[off..off + card].iter().cloned())
                .into_iter()
                .map(|c| c + 1.0)
                .collect();
            table.push(normalize(cells, &format!("feature {i} marginal"))?);
        }
        tables.push(table);
    }
    NbParameters::new(prior, tables)
}

/// Class posterior p(y|x) ∝ p(y) * prod_i p(x_i|y), computed in log space.
///
/// `instance` must match the schema the parameters were built for.
pub fn nb_posterior(params: &NbParameters, instance: &[f64]) -> ClassPosterior {
    assert_eq!(
        instance.len(),
        params.feature_count(),
        "instance length does not match the model schema"
    );
    let r = params.class_count();
    let mut scores = params.log_prior().to_vec();
    for (i, log_table) in params.log_tables().iter().enumerate() {
        let value = instance[i] as usize;
        assert!(
            instance[i].fract() == 0.0 && value >= 1 && value <= log_table[0].len(),
            "feature {i} value {} outside the model's categories",
            instance[i]
        );
        for y in 0..r {
            scores[y] += log_table[y][value - 1];
        }
    }
    ClassPosterior::from_log_scores(&scores)
}

/// Naive Bayes as a closed-form learner with a chosen estimator.
#[derive(Debug, Clone, Copy)]
pub struct NbLearner {
    pub estimator: Estimator,
}

impl NbLearner {
    pub fn new(estimator: Estimator) -> Self {
        NbLearner { estimator }
    }
}

impl ClosedFormLearner for NbLearner {
    type Params = NbParameters;

    fn statistics(&self, data: &Dataset) -> Result<StatisticsVector> {
        nb_statistics(data)
    }

    fn weighted_statistics(
        &self,
        data: &Dataset,
        posteriors: &[ClassPosterior],
    ) -> Result<StatisticsVector> {
        nb_weighted_statistics(data, posteriors)
    }

    fn parameters(&self, stats: &StatisticsVector) -> Result<NbParameters> {
        match self.estimator {
            Estimator::Ml => nb_ml_params(stats),
            Estimator::Map => nb_map_params(stats),
        }
    }

    fn posterior(&self, params: &NbParameters, instance: &[f64]) -> ClassPosterior {
        nb_posterior(params, instance)
    }

    fn check_compatible(&self, params: &NbParameters, data: &Dataset) -> Result<()> {
        if data.class_count() != params.class_count() {
            return Err(Error::Schema(format!(
                "dataset has {} classes, model {}",
                data.class_count(),
                params.class_count()
            )));
        }
        let cards = params.cardinalities();
        if data.feature_count() != cards.len() {
            return Err(Error::Schema(format!(
                "dataset has {} features, model {}",
                data.feature_count(),
                cards.len()
            )));
        }
        for (i, kind) in data.schema().iter().enumerate() {
            match kind {
                FeatureKind::Categorical { cardinality } if *cardinality == cards[i] => {}
                FeatureKind::Categorical { cardinality } => {
                    return Err(Error::Schema(format!(
                        "feature {i} has cardinality {cardinality}, model expects {}",
                        cards[i]
                    )))
                }
                FeatureKind::Continuous => {
                    return Err(Error::Schema(format!(
                        "feature {i} is continuous; naive Bayes requires categorical features"
                    )))
                }
            }
        }
        Ok(())
    }
}
