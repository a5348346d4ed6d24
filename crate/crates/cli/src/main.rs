mod commands;
mod model_file;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "riskcal",
    version,
    about = "Generative classifiers calibrated against the training soft error"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the built-in three-point fixture and echo its trace
    Toy(commands::toy::ToyArgs),
    /// Train a single model on a full CSV file
    Fit(commands::fit::FitArgs),
    /// Run the repeated train/test protocol described by a config file
    Experiment(commands::experiment::ExperimentArgs),
    /// Discretize continuous features with per-feature 1-D k-means
    Discretize(commands::discretize::DiscretizeArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Toy(args) => commands::toy::run(&args),
        Command::Fit(args) => commands::fit::run(&args),
        Command::Experiment(args) => commands::experiment::run(&args),
        Command::Discretize(args) => commands::discretize::run(&args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.exit_code());
    }
}
