mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "retrogfn", version, about = "Template-composition GFlowNet retrosynthesis toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Seed for every random choice of the run.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic mapped-reaction corpus (train and test splits).
    GenCorpus(commands::GenCorpusArgs),
    /// Extract reaction templates and the pattern library from a corpus.
    ExtractTemplates(commands::ExtractArgs),
    /// Train the retrosynthesis policy.
    TrainGfn(commands::TrainGfnArgs),
    /// Generate negative reactions and, optionally, the challenging set.
    GenNegatives(commands::GenNegativesArgs),
    /// Train the reaction feasibility classifier.
    TrainRfm(commands::TrainRfmArgs),
    /// Predict ranked reactant sets for every product of a corpus.
    Infer(commands::InferArgs),
    /// Score predictions: top-k, MRR, round-trip, FTC, diversity, filter ablation.
    Eval(commands::EvalArgs),
    /// Expected-income table of the drug-design scenario.
    Econ(commands::EconArgs),
    /// Run the oracle suite and print one line per check.
    Selfcheck(commands::SelfcheckArgs),
}

/// Default location of the data directory.
pub fn data_dir() -> PathBuf {
    PathBuf::from("data")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(a),
        Command::ExtractTemplates(a) => commands::extract_templates(a),
        Command::TrainGfn(a) => commands::train_gfn(a),
        Command::GenNegatives(a) => commands::gen_negatives(a),
        Command::TrainRfm(a) => commands::train_rfm(a),
        Command::Infer(a) => commands::infer(a),
        Command::Eval(a) => commands::eval(a),
        Command::Econ(a) => commands::econ(a),
        Command::Selfcheck(a) => commands::selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("retrogfn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
