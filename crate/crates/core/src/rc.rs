//! Risk-based calibration: iteratively nudges sufficient statistics toward
//! the hard-label statistics and away from the posterior-weighted ones,
//! re-mapping parameters after every step.

use crate::data::{Dataset, StatisticsVector};
use crate::error::{Error, Result};
use crate::learner::{losses_from_posteriors, ClosedFormLearner};

/// How a calibration loop decides what to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    /// Stop as soon as the training soft error increases and return the
    /// previous model.
    StrictStop,
    /// Run the full iteration budget and return the model with the lowest
    /// training soft error (earliest on ties).
    BestTracking,
}

/// Configuration of one calibration run.
#[derive(Debug, Clone)]
pub struct RcConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub mode: CalibrationMode,
    /// Keep a copy of the statistics at every iteration. Off by default.
    pub snapshot_statistics: bool,
}

impl RcConfig {
    pub fn new(learning_rate: f64, max_iterations: usize, mode: CalibrationMode) -> Result<Self> {
        // zero is allowed so that a calibrator with lr = 0 degrades to the
        // plain closed-form model
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be non-negative, got {learning_rate}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(RcConfig {
            learning_rate,
            max_iterations,
            mode,
            snapshot_statistics: false,
        })
    }

    pub fn with_snapshots(mut self) -> Self {
        self.snapshot_statistics = true;
        self
    }
}

/// Training losses of the model produced at one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub soft_error: f64,
    pub error: f64,
}

/// Per-iteration loss trace of a calibration run. Entry 0 describes the
/// initial model, entry t the model after t updates.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    /// Iteration with the minimal training soft error; earliest on ties.
    pub best_iteration: usize,
    pub snapshots: Option<Vec<StatisticsVector>>,
}

impl FitTrace {
    /// Assembles a trace from records, locating the best iteration.
    pub fn from_records(
        records: Vec<IterationRecord>,
        snapshots: Option<Vec<StatisticsVector>>,
    ) -> Self {
        let best_iteration = records
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| a.soft_error.partial_cmp(&b.soft_error).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        FitTrace {
            records,
            best_iteration,
            snapshots,
        }
    }

    pub fn soft_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.soft_error).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// CSV document with columns iteration, soft_error, error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,soft_error,error\n");
        for (t, rec) in self.records.iter().enumerate() {
            out.push_str(&format!("{t},{},{}\n", rec.soft_error, rec.error));
        }
        out
    }
}

/// One statistics update: `s + lr * (s_xy - s_xh)`.
pub fn rc_step(
    s: &StatisticsVector,
    s_xy: &StatisticsVector,
    s_xh: &StatisticsVector,
    learning_rate: f64,
) -> Result<StatisticsVector> {
    let direction = s_xy.add_scaled(s_xh, -1.0)?;
    s.add_scaled(&direction, learning_rate)
}

/// Runs risk-based calibration for a closed-form learner.
///
/// Statistics start at s(X,Y); each iteration adds
/// `lr * (s(X,Y) - s(X,h))` and re-maps parameters. The returned model
/// depends on the configured mode.
pub fn rc_fit<L: ClosedFormLearner>(
    data: &Dataset,
    learner: &L,
    config: &RcConfig,
) -> Result<(L::Params, FitTrace)> {
    let s_xy = learner.statistics(data)?;
    let mut stats = s_xy.clone();
    let mut params = learner
        .parameters(&stats)
        .map_err(|e| Error::at_iteration(0, e))?;
    let mut posteriors = learner.posteriors(&params, data);
    let mut record = losses_from_posteriors(&posteriors, data.labels());

    let mut records = vec![IterationRecord {
        soft_error: record.soft_error,
        error: record.error,
    }];
    let mut snapshots = config.snapshot_statistics.then(|| vec![stats.clone()]);

    let mut best = (record.soft_error, params.clone());

    for t in 1..=config.max_iterations {
        let s_xh = learner.weighted_statistics(data, &posteriors)?;
        stats = rc_step(&stats, &s_xy, &s_xh, config.learning_rate)?;
        let next = learner
            .parameters(&stats)
            .map_err(|e| Error::at_iteration(t, e))?;
        posteriors = learner.posteriors(&next, data);
        let next_record = losses_from_posteriors(&posteriors, data.labels());
        records.push(IterationRecord {
            soft_error: next_record.soft_error,
            error: next_record.error,
        });
        if let Some(snaps) = snapshots.as_mut() {
            snaps.push(stats.clone());
        }

        if config.mode == CalibrationMode::StrictStop && next_record.soft_error > record.soft_error
        {
            // keep the model from before the deterioration
            return Ok((params, FitTrace::from_records(records, snapshots)));
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
    Ok((chosen, FitTrace::from_records(records, snapshots)))
}
