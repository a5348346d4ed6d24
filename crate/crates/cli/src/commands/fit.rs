use std::path::PathBuf;

use clap::{Args, ValueEnum};

use riskcal::{
    dataset_losses, dfe_fit, gd_fit_nb, gd_fit_qda, load_csv, rc_fit, ClosedFormLearner, Dataset,
    FitTrace, GdConfig, IterationRecord, LossSummary, NbLearner, QdaLearner, QdaMapPrior,
    RcConfig,
};

use crate::model_file::ModelFile;

use super::{
    announce_and_store_config, csv_options, write_output, CommandResult, EstimatorArg, Failure,
    HeaderArg, ModeArg,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Nb,
    Qda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibratorArg {
    None,
    Rc,
    Gd,
    Dfe,
}

#[derive(Args)]
pub struct FitArgs {
    /// CSV file; the last column is the class label
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Ml)]
    pub estimator: EstimatorArg,
    #[arg(long, value_enum, default_value_t = CalibratorArg::None)]
    pub calibrator: CalibratorArg,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub iterations: usize,
    /// best keeps the lowest-soft-error model; strict stops on the first
    /// deterioration
    #[arg(long, value_enum, default_value_t = ModeArg::Best)]
    pub mode: ModeArg,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Defaults to the model path with a .trace.csv extension
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    pub header: HeaderArg,
    /// QDA MAP prior mean, comma-separated; defaults to the global mean
    #[arg(long)]
    pub map_mean: Option<String>,
    /// QDA MAP prior covariance diagonal, comma-separated; defaults to the
    /// diagonal of the global covariance
    #[arg(long)]
    pub map_cov_diag: Option<String>,
    /// Equivalent sample size of the QDA MAP prior mean
    #[arg(long, default_value_t = 10.0)]
    pub map_m1: f64,
    /// Equivalent sample size of the QDA MAP prior covariance
    #[arg(long, default_value_t = 10.0)]
    pub map_m2: f64,
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("{what}: '{cell}' is not a number")))
        })
        .collect()
}

fn map_prior_override(args: &FitArgs, data: &Dataset) -> Result<Option<QdaMapPrior>, Failure> {
    let weights_touched = args.map_m1 != 10.0 || args.map_m2 != 10.0;
    if args.map_mean.is_none() && args.map_cov_diag.is_none() && !weights_touched {
        return Ok(None);
    }
    let stats = riskcal::qda_statistics(data)?;
    let mut prior = QdaMapPrior::from_statistics(&stats)?;
    let n = data.feature_count();
    if let Some(text) = &args.map_mean {
        let mean = parse_vector(text, "--map-mean")?;
        if mean.len() != n {
            return Err(Failure::usage(format!(
                "--map-mean holds {} values, dataset has {n} features",
                mean.len()
            )));
        }
        prior.mean = nalgebra::DVector::from_vec(mean);
    }
    if let Some(text) = &args.map_cov_diag {
        let diag = parse_vector(text, "--map-cov-diag")?;
        if diag.len() != n {
            return Err(Failure::usage(format!(
                "--map-cov-diag holds {} values, dataset has {n} features",
                diag.len()
            )));
        }
        if diag.iter().any(|&v| v < 0.0) {
            return Err(Failure::usage("--map-cov-diag entries must be non-negative"));
        }
        prior.covariance = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
    }
    prior.mean_weight = args.map_m1;
    prior.cov_weight = args.map_m2;
    Ok(Some(prior))
}

pub fn run(args: &FitArgs) -> CommandResult {
    if args.family == FamilyArg::Qda && args.calibrator == CalibratorArg::Dfe {
        return Err(Failure::usage("DFE supports NB only"));
    }
    let trace_out = args
        .trace_out
        .clone()
        .unwrap_or_else(|| args.model_out.with_extension("trace.csv"));
    let resolved_path = args
        .model_out
        .parent()
        .map(|p| p.join("resolved_config.json"))
        .unwrap_or_else(|| PathBuf::from("resolved_config.json"));
    announce_and_store_config(
        &serde_json::json!({
            "command": "fit",
            "data": args.data,
            "family": format!("{:?}", args.family).to_lowercase(),
            "estimator": format!("{:?}", args.estimator).to_lowercase(),
            "calibrator": format!("{:?}", args.calibrator).to_lowercase(),
            "lr": args.lr,
            "iterations": args.iterations,
            "mode": format!("{:?}", args.mode).to_lowercase(),
            "model_out": args.model_out,
            "trace_out": trace_out,
            "map_mean": args.map_mean,
            "map_cov_diag": args.map_cov_diag,
            "map_m1": args.map_m1,
            "map_m2": args.map_m2,
        }),
        &resolved_path,
    )?;

    let options = csv_options(args.header, args.family == FamilyArg::Qda);
    let data = load_csv(&args.data, &options)?;

    let (model, trace, losses) = match args.family {
        FamilyArg::Nb => {
            if data.has_continuous() {
                return Err(Failure::usage(
                    "the nb family needs categorical features; run `riskcal discretize` first",
                ));
            }
            let learner = NbLearner::new(args.estimator.into());
            let (params, trace) = match args.calibrator {
                CalibratorArg::None => closed_form(&learner, &data)?,
                CalibratorArg::Rc => rc_fit(
                    &data,
                    &learner,
                    &RcConfig::new(args.lr, args.iterations, args.mode.into())?,
                )?,
                CalibratorArg::Gd => {
                    let init = learner.fit(&data)?;
                    gd_fit_nb(
                        &data,
                        &init,
                        &GdConfig::new(args.lr, args.iterations, args.mode.into())?,
                    )?
                }
                CalibratorArg::Dfe => dfe_fit(&data, args.iterations, false)?,
            };
            let losses = dataset_losses(&learner, &params, &data)?;
            (ModelFile::Nb(params), trace, losses)
        }
        FamilyArg::Qda => {
            let mut learner = QdaLearner::new(args.estimator.into());
            learner.map_prior = map_prior_override(args, &data)?;
            let (params, trace) = match args.calibrator {
                CalibratorArg::None => closed_form(&learner, &data)?,
                CalibratorArg::Rc => rc_fit(
                    &data,
                    &learner,
                    &RcConfig::new(args.lr, args.iterations, args.mode.into())?,
                )?,
                CalibratorArg::Gd => {
                    let init = learner.fit(&data)?;
                    gd_fit_qda(
                        &data,
                        &init,
                        &GdConfig::new(args.lr, args.iterations, args.mode.into())?,
                    )?
                }
                CalibratorArg::Dfe => unreachable!("rejected above"),
            };
            let losses = dataset_losses(&learner, &params, &data)?;
            (ModelFile::Qda(params), trace, losses)
        }
    };

    write_output(
        &args.model_out,
        &(serde_json::to_string_pretty(&model).expect("model serializes") + "\n"),
    )?;
    write_output(&trace_out, &trace.to_csv())?;
    report(&losses);
    Ok(())
}

fn closed_form<L: ClosedFormLearner>(
    learner: &L,
    data: &Dataset,
) -> riskcal::Result<(L::Params, FitTrace)> {
    let params = learner.fit(data)?;
    let losses = dataset_losses(learner, &params, data)?;
    let trace = FitTrace::from_records(
        vec![IterationRecord {
            soft_error: losses.soft_error,
            error: losses.error,
        }],
        None,
    );
    Ok((params, trace))
}

fn report(losses: &LossSummary) {
    println!(
        "train error: {:.6} ({:.2}%)",
        losses.error,
        100.0 * losses.error
    );
    println!("train soft error: {:.6}", losses.soft_error);
}
