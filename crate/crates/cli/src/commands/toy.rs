use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use riskcal::{
    rc_fit, toy_decision_boundary, toy_fixture, CalibrationMode, ClosedFormLearner, RcConfig,
};

use super::{announce_and_store_config, create_dir, write_output, CommandResult, Failure};

const CHECKPOINTS: [usize; 8] = [0, 1, 2, 4, 8, 16, 32, 64];

#[derive(Args)]
pub struct ToyArgs {
    /// Learning rate of the calibration loop
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 64)]
    pub iterations: usize,
    /// Output directory for trace.csv, summary files and the resolved config
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Checkpoint {
    iteration: usize,
    soft_error: f64,
}

#[derive(Serialize)]
struct ToySummary {
    initial_statistics: Vec<f64>,
    initial_means: [f64; 2],
    initial_decision_boundary: f64,
    statistics_after_first_iteration: Option<Vec<f64>>,
    means_after_first_iteration: Option<[f64; 2]>,
    checkpoints: Vec<Checkpoint>,
    best_iteration: usize,
    final_means: [f64; 2],
}

pub fn run(args: &ToyArgs) -> CommandResult {
    create_dir(&args.out)?;
    announce_and_store_config(
        &serde_json::json!({
            "command": "toy",
            "lr": args.lr,
            "iterations": args.iterations,
            "out": args.out,
        }),
        &args.out.join("resolved_config.json"),
    )?;

    let (data, learner) = toy_fixture();
    let config = RcConfig::new(args.lr, args.iterations, CalibrationMode::BestTracking)
        .map_err(Failure::from)?
        .with_snapshots();
    let (params, trace) = rc_fit(&data, &learner, &config)?;
    let snapshots = trace.snapshots.as_ref().expect("snapshots enabled");

    let initial_params = learner.parameters(&snapshots[0])?;
    let after_first = snapshots
        .get(1)
        .map(|s| learner.parameters(s))
        .transpose()?;
    let summary = ToySummary {
        initial_statistics: snapshots[0].count_and_first_flat(),
        initial_means: initial_params.means,
        initial_decision_boundary: toy_decision_boundary(&initial_params),
        statistics_after_first_iteration: snapshots.get(1).map(|s| s.count_and_first_flat()),
        means_after_first_iteration: after_first.map(|p| p.means),
        checkpoints: CHECKPOINTS
            .iter()
            .filter(|&&t| t < trace.records.len())
            .map(|&t| Checkpoint {
                iteration: t,
                soft_error: trace.records[t].soft_error,
            })
            .collect(),
        best_iteration: trace.best_iteration,
        final_means: params.means,
    };

    write_output(&args.out.join("trace.csv"), &trace.to_csv())?;
    write_output(
        &args.out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    let text = summary_text(&summary);
    write_output(&args.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn summary_text(summary: &ToySummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "initial statistics: {:?}\n",
        summary.initial_statistics
    ));
    out.push_str(&format!(
        "initial means: ({:.4}, {:.4})\n",
        summary.initial_means[0], summary.initial_means[1]
    ));
    out.push_str(&format!(
        "initial decision boundary: {:.4}\n",
        summary.initial_decision_boundary
    ));
    if let (Some(stats), Some(means)) = (
        &summary.statistics_after_first_iteration,
        &summary.means_after_first_iteration,
    ) {
        out.push_str(&format!(
            "statistics after first iteration: [{}]\n",
            stats
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ));
        out.push_str(&format!(
            "means after first iteration: ({:.4}, {:.4})\n",
            means[0], means[1]
        ));
    }
    out.push_str("soft error by iteration:\n");
    for c in &summary.checkpoints {
        out.push_str(&format!("  t={:<3} {:.4}\n", c.iteration, c.soft_error));
    }
    out.push_str(&format!("best iteration: {}\n", summary.best_iteration));
    out.push_str(&format!(
        "final means: ({:.4}, {:.4})\n",
        summary.final_means[0], summary.final_means[1]
    ));
    out
}
