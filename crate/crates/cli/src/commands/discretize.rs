use std::path::PathBuf;

use clap::Args;

use riskcal::{apply_discretizer, dataset_to_csv, fit_discretizer, load_csv};

use super::{
    announce_and_store_config, csv_options, write_output, CommandResult, Failure, HeaderArg,
};

#[derive(Args)]
pub struct DiscretizeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub bins: usize,
    /// Seed for the per-feature k-means initialization
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Discretized CSV destination
    #[arg(long)]
    pub out: PathBuf,
    /// Destination of the fitted per-feature centroids (JSON)
    #[arg(long)]
    pub codec_out: PathBuf,
    #[arg(long, value_enum, default_value_t = HeaderArg::Auto)]
    pub header: HeaderArg,
}

pub fn run(args: &DiscretizeArgs) -> CommandResult {
    let resolved_path = args
        .out
        .parent()
        .map(|p| p.join("resolved_config.json"))
        .unwrap_or_else(|| PathBuf::from("resolved_config.json"));
    announce_and_store_config(
        &serde_json::json!({
            "command": "discretize",
            "data": args.data,
            "bins": args.bins,
            "seed": args.seed,
            "out": args.out,
            "codec_out": args.codec_out,
        }),
        &resolved_path,
    )?;

    let data = load_csv(&args.data, &csv_options(args.header, false))?;
    if !data.has_continuous() {
        return Err(Failure::usage(
            "every feature is already categorical; nothing to discretize",
        ));
    }
    let discretizer = fit_discretizer(&data, args.bins, args.seed)?;
    let coded = apply_discretizer(&discretizer, &data)?;
    write_output(&args.out, &dataset_to_csv(&coded))?;
    write_output(
        &args.codec_out,
        &(serde_json::to_string_pretty(&discretizer).expect("discretizer serializes") + "\n"),
    )?;

    for (j, column) in discretizer.columns.iter().enumerate() {
        match column {
            Some(centroids) => println!("feature {j}: {} bins", centroids.len()),
            None => println!("feature {j}: categorical, passed through"),
        }
    }
    Ok(())
}
