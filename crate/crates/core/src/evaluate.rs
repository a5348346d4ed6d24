//! Experiment harness: repeated train/test splits, a method matrix of
//! closed-form, calibrated and gradient-descent learners, and report
//! emission.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::baselines::{dfe_fit, gd_fit_nb, gd_fit_qda, GdConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learner::{dataset_losses, ClosedFormLearner, Estimator};
use crate::nb::NbLearner;
use crate::preprocess::{
    apply_discretizer, fit_discretizer, load_csv, mix_seed, split, CsvOptions, SplitSpec,
};
use crate::qda::QdaLearner;
use crate::rc::{rc_fit, CalibrationMode, FitTrace, RcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Nb,
    Qda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "closed-form")]
    ClosedForm,
    #[serde(rename = "rc")]
    Rc,
    #[serde(rename = "gd")]
    Gd,
    #[serde(rename = "dfe")]
    Dfe,
}

impl Method {
    fn label(&self, estimator: Estimator) -> &'static str {
        match self {
            Method::ClosedForm => match estimator {
                Estimator::Ml => "ML",
                Estimator::Map => "MAP",
            },
            Method::Rc => "RC",
            Method::Gd => "GD",
            Method::Dfe => "DFE",
        }
    }

    fn csv_name(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Rc => "rc",
            Method::Gd => "gd",
            Method::Dfe => "dfe",
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::ClosedForm, Method::Rc, Method::Gd]
}

fn default_lr() -> f64 {
    0.1
}

fn default_iterations() -> usize {
    64
}

fn default_repetitions() -> usize {
    5
}

fn default_test_fraction() -> f64 {
    0.25
}

fn default_bins() -> usize {
    5
}

fn default_jobs() -> usize {
    1
}

/// Full description of one experiment; the defaults encode the standard
/// protocol (lr 0.1, 64 iterations, 5 repetitions, 25% test, 5 bins).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    /// Report label; defaults to the dataset file stem.
    #[serde(default)]
    pub name: Option<String>,
    pub family: ModelFamily,
    pub estimator: Estimator,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Discretization bins; used by the NB family on continuous features.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Header handling for the dataset file; None auto-detects.
    #[serde(default)]
    pub header: Option<bool>,
    /// Worker threads over repetitions; never changes results.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Collects every config problem instead of stopping at the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            problems.push(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            ));
        }
        if self.iterations == 0 {
            problems.push("iterations must be at least 1".into());
        }
        if self.repetitions == 0 {
            problems.push("repetitions must be at least 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            problems.push(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.bins < 2 {
            problems.push(format!("bins must be at least 2, got {}", self.bins));
        }
        if self.jobs == 0 {
            problems.push("jobs must be at least 1".into());
        }
        if self.family == ModelFamily::Qda && self.methods.contains(&Method::Dfe) {
            problems.push("dfe supports the nb family only".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                problems.push(format!("method '{}' listed twice", m.csv_name()));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

/// Errors of one method in one repetition, as percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionOutcome {
    pub repetition: usize,
    pub train_error_pct: f64,
    pub test_error_pct: f64,
    /// Iteration of minimal training soft error; absent for closed-form.
    pub best_iteration: Option<usize>,
    /// First iteration at which RC matches GD's best soft error.
    pub reach: Option<usize>,
}

/// Aggregated results of one method across repetitions.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: Method,
    pub repetitions: Vec<RepetitionOutcome>,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub mean_best_iteration: Option<f64>,
    /// Mean reach; defined only when every repetition reached GD's best.
    pub mean_reach: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dataset: String,
    pub family: ModelFamily,
    pub estimator: Estimator,
    pub methods: Vec<MethodSummary>,
}

/// Smallest 1-based iteration whose soft error is at or below the lowest
/// soft error in the reference trace; `None` when never reached.
pub fn compute_reach(rc_soft: &[f64], reference_soft: &[f64]) -> Option<usize> {
    if rc_soft.len() < 2 || reference_soft.is_empty() {
        return None;
    }
    let target = reference_soft
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    (1..rc_soft.len()).find(|&t| rc_soft[t] <= target)
}

struct MethodRecord {
    method: Method,
    train_error_pct: f64,
    test_error_pct: f64,
    best_iteration: Option<usize>,
    soft_trace: Option<Vec<f64>>,
}

trait EvalFamily: ClosedFormLearner {
    fn gd(
        &self,
        data: &Dataset,
        init: &Self::Params,
        config: &GdConfig,
    ) -> Result<(Self::Params, FitTrace)>;

    fn dfe(&self, data: &Dataset, iterations: usize) -> Result<(Self::Params, FitTrace)>;
}

impl EvalFamily for NbLearner {
    fn gd(
        &self,
        data: &Dataset,
        init: &Self::Params,
        config: &GdConfig,
    ) -> Result<(Self::Params, FitTrace)> {
        gd_fit_nb(data, init, config)
    }

    fn dfe(&self, data: &Dataset, iterations: usize) -> Result<(Self::Params, FitTrace)> {
        dfe_fit(data, iterations, false)
    }
}

impl EvalFamily for QdaLearner {
    fn gd(
        &self,
        data: &Dataset,
        init: &Self::Params,
        config: &GdConfig,
    ) -> Result<(Self::Params, FitTrace)> {
        gd_fit_qda(data, init, config)
    }

    fn dfe(&self, _data: &Dataset, _iterations: usize) -> Result<(Self::Params, FitTrace)> {
        Err(Error::UnsupportedFamily(
            "DFE supports the nb family only".into(),
        ))
    }
}

fn run_repetition<L: EvalFamily>(
    learner: &L,
    config: &ExperimentConfig,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<MethodRecord>> {
    let initial = learner.fit(train)?;
    let mut records = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let record = match method {
            Method::ClosedForm => {
                let train_losses = dataset_losses(learner, &initial, train)?;
                let test_losses = dataset_losses(learner, &initial, test)?;
                MethodRecord {
                    method: *method,
                    train_error_pct: 100.0 * train_losses.error,
                    test_error_pct: 100.0 * test_losses.error,
                    best_iteration: None,
                    soft_trace: None,
                }
            }
            Method::Rc => {
                let rc_config = RcConfig::new(
                    config.learning_rate,
                    config.iterations,
                    CalibrationMode::BestTracking,
                )?;
                let (params, trace) = rc_fit(train, learner, &rc_config)?;
                let train_losses = dataset_losses(learner, &params, train)?;
                let test_losses = dataset_losses(learner, &params, test)?;
                MethodRecord {
                    method: *method,
                    train_error_pct: 100.0 * train_losses.error,
                    test_error_pct: 100.0 * test_losses.error,
                    best_iteration: Some(trace.best_iteration),
                    soft_trace: Some(trace.soft_errors()),
                }
            }
            Method::Gd => {
                let gd_config = GdConfig::new(
                    config.learning_rate,
                    config.iterations,
                    CalibrationMode::BestTracking,
                )?;
                let (params, trace) = learner.gd(train, &initial, &gd_config)?;
                let train_losses = dataset_losses(learner, &params, train)?;
                let test_losses = dataset_losses(learner, &params, test)?;
                MethodRecord {
                    method: *method,
                    train_error_pct: 100.0 * train_losses.error,
                    test_error_pct: 100.0 * test_losses.error,
                    best_iteration: Some(trace.best_iteration),
                    soft_trace: Some(trace.soft_errors()),
                }
            }
            Method::Dfe => {
                // DFE is tied to maximum likelihood counting statistics;
                // its initial model coincides with closed-form ML
                let (params, trace) = learner.dfe(train, config.iterations)?;
                let train_losses = dataset_losses(learner, &params, train)?;
                let test_losses = dataset_losses(learner, &params, test)?;
                MethodRecord {
                    method: *method,
                    train_error_pct: 100.0 * train_losses.error,
                    test_error_pct: 100.0 * test_losses.error,
                    best_iteration: Some(trace.best_iteration),
                    soft_trace: Some(trace.soft_errors()),
                }
            }
        };
        records.push(record);
    }
    Ok(records)
}

fn rep_outcomes(records: &[MethodRecord], repetition: usize) -> Vec<RepetitionOutcome> {
    let gd_trace = records
        .iter()
        .find(|r| r.method == Method::Gd)
        .and_then(|r| r.soft_trace.clone());
    records
        .iter()
        .map(|r| {
            let reach = match (r.method, &r.soft_trace, &gd_trace) {
                (Method::Rc, Some(rc), Some(gd)) => compute_reach(rc, gd),
                _ => None,
            };
            RepetitionOutcome {
                repetition,
                train_error_pct: r.train_error_pct,
                test_error_pct: r.test_error_pct,
                best_iteration: r.best_iteration,
                reach,
            }
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    values.sum::<f64>() / n
}

fn sample_std(values: impl Iterator<Item = f64> + Clone, center: f64) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let ss: f64 = values.map(|v| (v - center) * (v - center)).sum();
    (ss / (n - 1) as f64).sqrt()
}

fn summarize(method: Method, outcomes: Vec<RepetitionOutcome>) -> MethodSummary {
    let train_mean = mean(outcomes.iter().map(|o| o.train_error_pct));
    let test_mean = mean(outcomes.iter().map(|o| o.test_error_pct));
    let train_std = sample_std(outcomes.iter().map(|o| o.train_error_pct), train_mean);
    let test_std = sample_std(outcomes.iter().map(|o| o.test_error_pct), test_mean);
    let mean_best_iteration = if outcomes.iter().all(|o| o.best_iteration.is_some()) {
        Some(mean(
            outcomes.iter().map(|o| o.best_iteration.unwrap() as f64),
        ))
    } else {
        None
    };
    let mean_reach = if method == Method::Rc && outcomes.iter().all(|o| o.reach.is_some()) {
        Some(mean(outcomes.iter().map(|o| o.reach.unwrap() as f64)))
    } else {
        None
    };
    MethodSummary {
        method,
        repetitions: outcomes,
        train_mean,
        train_std,
        test_mean,
        test_std,
        mean_best_iteration,
        mean_reach,
    }
}

/// Runs the full protocol: per repetition, split, discretize when the NB
/// family sees continuous features, fit the closed-form estimator and run
/// every requested method from that same initialization.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate().map_err(Error::Config)?;
    let csv_options = CsvOptions {
        header: config.header,
        force_continuous: config.family == ModelFamily::Qda,
        ..CsvOptions::default()
    };
    let data = load_csv(&config.dataset, &csv_options)?;

    let rep_records = run_all_repetitions(config, &data)?;

    let mut per_method: Vec<Vec<RepetitionOutcome>> =
        vec![Vec::with_capacity(config.repetitions); config.methods.len()];
    for (rep, records) in rep_records.iter().enumerate() {
        for (slot, outcome) in per_method.iter_mut().zip(rep_outcomes(records, rep)) {
            slot.push(outcome);
        }
    }
    let methods = config
        .methods
        .iter()
        .zip(per_method)
        .map(|(&method, outcomes)| summarize(method, outcomes))
        .collect();
    Ok(ExperimentReport {
        dataset: config.dataset_name(),
        family: config.family,
        estimator: config.estimator,
        methods,
    })
}

fn run_all_repetitions(
    config: &ExperimentConfig,
    data: &Dataset,
) -> Result<Vec<Vec<MethodRecord>>> {
    let run_one = |rep: usize| -> Result<Vec<MethodRecord>> {
        let spec = SplitSpec::new(config.test_fraction, config.seed, rep as u64)?;
        let (raw_train, raw_test) = split(data, &spec)?;
        match config.family {
            ModelFamily::Nb => {
                let (train, test) = if raw_train.has_continuous() {
                    let discretizer = fit_discretizer(
                        &raw_train,
                        config.bins,
                        mix_seed(config.seed, 0x8000_0000_0000_0000 | rep as u64),
                    )?;
                    (
                        apply_discretizer(&discretizer, &raw_train)?,
                        apply_discretizer(&discretizer, &raw_test)?,
                    )
                } else {
                    (raw_train, raw_test)
                };
                run_repetition(&NbLearner::new(config.estimator), config, &train, &test)
            }
            ModelFamily::Qda => run_repetition(
                &QdaLearner::new(config.estimator),
                config,
                &raw_train,
                &raw_test,
            ),
        }
        .map_err(|e| Error::with_context(format!("repetition {rep}"), e))
    };

    let reps = config.repetitions;
    if config.jobs <= 1 {
        return (0..reps).map(run_one).collect();
    }
    let results: Mutex<Vec<Option<Result<Vec<MethodRecord>>>>> =
        Mutex::new((0..reps).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..config.jobs.min(reps) {
            scope.spawn(|| loop {
                let rep = next.fetch_add(1, Ordering::Relaxed);
                if rep >= reps {
                    break;
                }
                let outcome = run_one(rep);
                results.lock().unwrap()[rep] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every repetition ran"))
        .collect()
}

/// Full-precision CSV: one row per (method, repetition) plus a mean row
/// per method.
pub fn emit_report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "dataset,family,estimator,method,rep,train_error_pct,test_error_pct,best_iter,reach\n",
    );
    let family = match report.family {
        ModelFamily::Nb => "nb",
        ModelFamily::Qda => "qda",
    };
    let estimator = match report.estimator {
        Estimator::Ml => "ml",
        Estimator::Map => "map",
    };
    for summary in &report.methods {
        for o in &summary.repetitions {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                report.dataset,
                family,
                estimator,
                summary.method.csv_name(),
                o.repetition,
                o.train_error_pct,
                o.test_error_pct,
                o.best_iteration.map(|b| b.to_string()).unwrap_or_default(),
                o.reach.map(|x| x.to_string()).unwrap_or_default(),
            ));
        }
        out.push_str(&format!(
            "{},{},{},{},mean,{},{},{},{}\n",
            report.dataset,
            family,
            estimator,
            summary.method.csv_name(),
            summary.train_mean,
            summary.test_mean,
            summary
                .mean_best_iteration
                .map(|b| b.to_string())
                .unwrap_or_default(),
            summary
                .mean_reach
                .map(|x| x.to_string())
                .unwrap_or_else(|| {
                    if summary.method == Method::Rc {
                        "-".into()
                    } else {
                        String::new()
                    }
                }),
        ));
    }
    out
}

/// Markdown table with zero-padded rounded percentages, one method per row.
pub fn emit_report_markdown(report: &ExperimentReport) -> String {
    let family = match report.family {
        ModelFamily::Nb => "NB",
        ModelFamily::Qda => "QDA",
    };
    let estimator = match report.estimator {
        Estimator::Ml => "ML",
        Estimator::Map => "MAP",
    };
    let mut out = format!(
        "# {} — {} ({} estimator)\n\n| Method | Training (%) | Test (%) | Iter | Reach |\n|---|---|---|---|---|\n",
        report.dataset, family, estimator
    );
    for summary in &report.methods {
        let iter_cell = summary
            .mean_best_iteration
            .map(|v| format!("{v:04.1}"))
            .unwrap_or_else(|| "-".into());
        let reach_cell = summary
            .mean_reach
            .map(|v| format!("{v:04.1}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "| {} | {:02.0} ± {:02.0} | {:02.0} ± {:02.0} | {} | {} |\n",
            summary.method.label(report.estimator),
            summary.train_mean,
            summary.train_std,
            summary.test_mean,
            summary.test_std,
            iter_cell,
            reach_cell,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    #[test]
    fn reach_definition_examples() {
        assert_eq!(compute_reach(&[0.3, 0.1], &[0.3, 0.2, 0.25]), Some(1));
        assert_eq!(compute_reach(&[0.3, 0.25, 0.21], &[0.3, 0.2]), None);
        // equality counts
        assert_eq!(compute_reach(&[0.3, 0.2], &[0.3, 0.2]), Some(1));
        assert_eq!(compute_reach(&[0.3], &[0.3, 0.2]), None);
    }

    #[test]
    fn reach_holds_its_minimality_property() {
        let rc = [0.5, 0.4, 0.3, 0.2, 0.1];
        let gd = [0.5, 0.35, 0.25];
        let reach = compute_reach(&rc, &gd).unwrap();
        let target = 0.25;
        assert!(rc[reach] <= target);
        for t in 1..reach {
            assert!(rc[t] > target);
        }
    }

    fn outcome(rep: usize, train: f64, test: f64) -> RepetitionOutcome {
        RepetitionOutcome {
            repetition: rep,
            train_error_pct: train,
            test_error_pct: test,
            best_iteration: Some(rep + 1),
            reach: Some(2),
        }
    }

    #[test]
    fn summaries_match_independent_mean_and_std() {
        let values = [(3.0, 5.0), (4.0, 6.0), (5.0, 4.0), (2.0, 8.0), (6.0, 2.0)];
        let outcomes: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &(tr, te))| outcome(i, tr, te))
            .collect();
        let summary = summarize(Method::Rc, outcomes);
        let n = values.len() as f64;
        let train_mean: f64 = values.iter().map(|v| v.0).sum::<f64>() / n;
        let train_var: f64 = values
            .iter()
            .map(|v| (v.0 - train_mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert_abs_diff_eq!(summary.train_mean, train_mean, epsilon = 1e-12);
        assert_abs_diff_eq!(summary.train_std, train_var.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(summary.mean_reach.unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(summary.mean_best_iteration.unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reach_is_undefined_if_any_repetition_misses() {
        let mut outcomes: Vec<_> = (0..3).map(|i| outcome(i, 3.0, 4.0)).collect();
        outcomes[1].reach = None;
        let summary = summarize(Method::Rc, outcomes);
        assert!(summary.mean_reach.is_none());
    }

    fn empty_report() -> ExperimentReport {
        ExperimentReport {
            dataset: "demo".into(),
            family: ModelFamily::Nb,
            estimator: Estimator::Ml,
            methods: vec![],
        }
    }

    #[test]
    fn empty_method_list_yields_header_only_csv() {
        let csv = emit_report_csv(&empty_report());
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("dataset,family,estimator,method,rep"));
    }

    #[test]
    fn one_method_five_reps_yields_six_rows() {
        let mut report = empty_report();
        report.methods.push(summarize(
            Method::ClosedForm,
            (0..5)
                .map(|i| RepetitionOutcome {
                    repetition: i,
                    train_error_pct: 4.0,
                    test_error_pct: 5.0,
                    best_iteration: None,
                    reach: None,
                })
                .collect(),
        ));
        let csv = emit_report_csv(&report);
        assert_eq!(csv.lines().count(), 7); // header + 5 reps + mean
    }

    #[test]
    fn undefined_reach_renders_a_dash() {
        let mut report = empty_report();
        let mut outcomes: Vec<_> = (0..2).map(|i| outcome(i, 3.0, 4.0)).collect();
        outcomes[0].reach = None;
        report.methods.push(summarize(Method::Rc, outcomes));
        let md = emit_report_markdown(&report);
        let rc_row = md.lines().find(|l| l.starts_with("| RC")).unwrap();
        assert!(rc_row.trim_end().ends_with("| - |"));
        let csv = emit_report_csv(&report);
        let mean_row = csv.lines().find(|l| l.contains(",mean,")).unwrap();
        assert!(mean_row.ends_with(",-"));
    }

    #[test]
    fn markdown_pads_like_the_result_tables() {
        let mut report = empty_report();
        report.methods.push(summarize(
            Method::Rc,
            (0..2).map(|i| outcome(i, 3.6, 4.4)).collect(),
        ));
        let md = emit_report_markdown(&report);
        assert!(md.contains("| 04 ± 00 |"));
        assert!(md.contains("| 02.0 |"));
    }

    fn synthetic_csv(path: &std::path::Path) {
        // two noisy but separable classes in two continuous features
        let mut f = std::fs::File::create(path).unwrap();
        let mut state = 88172645463325252u64;
        let mut noise = move || {
            // xorshift into (-0.5, 0.5)
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..60 {
            let (cx, cy, label) = if i % 2 == 0 {
                (0.0, 0.0, "a")
            } else {
                (3.0, 2.0, "b")
            };
            writeln!(f, "{},{},{}", cx + noise(), cy + noise(), label).unwrap();
        }
    }

    fn base_config(path: &std::path::Path, family: ModelFamily) -> ExperimentConfig {
        ExperimentConfig {
            dataset: path.to_path_buf(),
            name: None,
            family,
            estimator: Estimator::Ml,
            methods: default_methods(),
            learning_rate: 0.1,
            iterations: 8,
            repetitions: 3,
            seed: 11,
            test_fraction: 0.25,
            bins: 5,
            header: Some(false),
            jobs: 1,
        }
    }

    #[test]
    fn experiment_is_deterministic_and_jobs_do_not_change_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.csv");
        synthetic_csv(&path);
        for family in [ModelFamily::Nb, ModelFamily::Qda] {
            let config = base_config(&path, family);
            let a = emit_report_csv(&run_experiment(&config).unwrap());
            let b = emit_report_csv(&run_experiment(&config).unwrap());
            assert_eq!(a, b);
            let mut parallel = config.clone();
            parallel.jobs = 3;
            let c = emit_report_csv(&run_experiment(&parallel).unwrap());
            assert_eq!(a, c);
        }
    }

    #[test]
    fn closed_form_only_reports_have_no_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.csv");
        synthetic_csv(&path);
        let mut config = base_config(&path, ModelFamily::Qda);
        config.methods = vec![Method::ClosedForm];
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.methods.len(), 1);
        assert!(report.methods[0].mean_best_iteration.is_none());
        assert!(report.methods[0].mean_reach.is_none());
    }

    #[test]
    fn all_methods_share_the_initial_soft_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.csv");
        synthetic_csv(&path);
        let mut config = base_config(&path, ModelFamily::Nb);
        config.methods = vec![Method::Rc, Method::Gd, Method::Dfe];
        config.repetitions = 1;
        let spec = SplitSpec::new(config.test_fraction, config.seed, 0).unwrap();
        let data = load_csv(&config.dataset, &CsvOptions::default()).unwrap();
        let (raw_train, _) = split(&data, &spec).unwrap();
        let discretizer = fit_discretizer(
            &raw_train,
            config.bins,
            mix_seed(config.seed, 0x8000_0000_0000_0000),
        )
        .unwrap();
        let train = apply_discretizer(&discretizer, &raw_train).unwrap();

        let learner = NbLearner::new(Estimator::Ml);
        let rc_config = RcConfig::new(0.1, 4, CalibrationMode::BestTracking).unwrap();
        let (_, rc_trace) = rc_fit(&train, &learner, &rc_config).unwrap();
        let init = learner.fit(&train).unwrap();
        let gd_config = GdConfig::new(0.1, 4, CalibrationMode::BestTracking).unwrap();
        let (_, gd_trace) = gd_fit_nb(&train, &init, &gd_config).unwrap();
        let (_, dfe_trace) = dfe_fit(&train, 4, false).unwrap();
        assert_eq!(
            rc_trace.records[0].soft_error.to_bits(),
            gd_trace.records[0].soft_error.to_bits()
        );
        assert_eq!(
            rc_trace.records[0].soft_error.to_bits(),
            dfe_trace.records[0].soft_error.to_bits()
        );
    }

    #[test]
    fn qda_with_dfe_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synthetic.csv");
        synthetic_csv(&path);
        let mut config = base_config(&path, ModelFamily::Qda);
        config.methods.push(Method::Dfe);
        assert!(matches!(
            run_experiment(&config),
            Err(Error::Config(problems)) if problems.iter().any(|p| p.contains("dfe"))
        ));
    }

    #[test]
    fn config_defaults_mirror_the_protocol() {
        let json = r#"{"dataset": "x.csv", "family": "nb", "estimator": "ml"}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config.learning_rate, 0.1);
        assert_eq!(config.iterations, 64);
        assert_eq!(config.repetitions, 5);
        assert_eq!(config.test_fraction, 0.25);
        assert_eq!(config.bins, 5);
        assert_eq!(
            config.methods,
            vec![Method::ClosedForm, Method::Rc, Method::Gd]
        );
    }
}
