//! Risk-based calibration for generative classifiers.
//!
//! Generative classifiers with closed-form learning split into a statistics
//! mapping and a parameter mapping. This crate implements that split for
//! discrete naive Bayes and quadratic discriminant analysis, the iterative
//! calibration loop that retargets the statistics at the training soft
//! error, gradient-descent and frequency-estimate baselines, CSV ingestion
//! with k-means discretization, and an experiment harness with train/test
//! repetitions.

pub mod baselines;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod learner;
pub mod nb;
pub mod preprocess;
pub mod qda;
pub mod rc;
pub mod toy;

pub use baselines::{
    dfe_fit, gd_fit_nb, gd_fit_qda, nb_log_loss_gradient, project_simplex,
    qda_log_loss_gradient, GdConfig, NbNaturalParams, QdaNaturalParams,
};
pub use data::{
    hard_loss, soft_loss, stats_add_scaled, ClassPosterior, Dataset, FeatureKind, LossSummary,
    StatisticsVector, StatsLayout,
};
pub use evaluate::{
    compute_reach, emit_report_csv, emit_report_markdown, run_experiment, ExperimentConfig,
    ExperimentReport, Method, MethodSummary, ModelFamily, RepetitionOutcome,
};
pub use error::{Error, Result};
pub use learner::{dataset_losses, losses_from_posteriors, ClosedFormLearner, Estimator};
pub use nb::{
    nb_map_params, nb_ml_params, nb_posterior, nb_statistics, nb_weighted_statistics, NbLearner,
    NbParameters,
};
pub use preprocess::{
    apply_discretizer, dataset_to_csv, fit_discretizer, load_csv, load_csv_reader, split,
    write_csv, CsvOptions, Discretizer, SplitSpec,
};
pub use qda::{
    psd_repair, qda_map_params, qda_ml_params, qda_posterior, qda_statistics,
    qda_weighted_statistics, QdaLearner, QdaMapPrior, QdaParameters, PSD_FLOOR,
};
pub use rc::{rc_fit, rc_step, CalibrationMode, FitTrace, IterationRecord, RcConfig};
pub use toy::{toy_decision_boundary, toy_fixture, ToyGaussianLearner, ToyParameters};
