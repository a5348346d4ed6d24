use std::path::PathBuf;

use clap::Args;

use riskcal::{emit_report_csv, emit_report_markdown, run_experiment, ExperimentConfig};

use super::{announce_and_store_config, create_dir, write_output, CommandResult, Failure};

#[derive(Args)]
pub struct ExperimentArgs {
    /// Experiment description (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving report.csv, report.md and the resolved config
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads over repetitions; overrides the config value
    #[arg(long)]
    pub jobs: Option<usize>,
}

pub fn run(args: &ExperimentArgs) -> CommandResult {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid config {}: {e}", args.config.display())))?;
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    config
        .validate()
        .map_err(|problems| Failure::usage(format!("invalid config: {}", problems.join("; "))))?;

    create_dir(&args.out_dir)?;
    announce_and_store_config(
        &serde_json::to_value(&config).expect("config serializes"),
        &args.out_dir.join("resolved_config.json"),
    )?;

    let report = run_experiment(&config)?;
    write_output(&args.out_dir.join("report.csv"), &emit_report_csv(&report))?;
    let markdown = emit_report_markdown(&report);
    write_output(&args.out_dir.join("report.md"), &markdown)?;
    print!("{markdown}");
    Ok(())
}
