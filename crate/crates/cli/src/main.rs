use awe_cli::analyze::run_analyze;
use awe_cli::config::RunConfig;
use awe_cli::embed::run_embed;
use awe_cli::error::CliError;
use awe_cli::eval::run_eval;
use awe_cli::report::run_report;
use awe_cli::synth::run_synth;
use awe_cli::train::run_train;
use awe_core::encoders::Objective;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Workbench for cross-lingual structure in acoustic word embeddings:
/// synthesizes related spoken-word corpora, trains encoders under several
/// objectives, and measures how much representational geometry they share.
#[derive(Parser)]
#[command(name = "awe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the configured experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the language family, speakers, and rendered word corpora.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Train encoders; defaults to every (language, objective) pair.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train only this language.
        #[arg(long)]
        language: Option<String>,
        /// Train only this objective (pge, cae, or cse).
        #[arg(long)]
        objective: Option<String>,
    },
    /// Embed held-out stimuli; defaults to every (stimuli, encoder, objective).
    Embed {
        #[command(flatten)]
        common: Common,
        /// Embed only this language's stimuli.
        #[arg(long)]
        stimuli: Option<String>,
        /// Use only this language's encoders.
        #[arg(long)]
        encoder: Option<String>,
        /// Use only encoders trained under this objective.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Score same/different-word retrieval on each language's test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate only this language.
        #[arg(long)]
        language: Option<String>,
        /// Evaluate only this objective.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Build similarity matrices, dendrograms, and the run summary.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Print a digest of a finished run.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_objective(text: Option<&String>) -> Result<Option<Objective>, CliError> {
    match text {
        None => Ok(None),
        Some(t) => Objective::parse(t).map(Some).ok_or_else(|| {
            CliError::config(format!("unknown objective {t:?}; expected pge, cae, or cse"))
        }),
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    RunConfig::load(&common.config, common.seed, common.out.clone())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Synth { common } => {
            let config = load(common)?;
            let outcome = run_synth(&config)?;
            for lang in &outcome.languages {
                println!(
                    "synth {}: {} segments ({} train / {} validation / {} test)",
                    lang.language, lang.segments, lang.train, lang.validation, lang.test
                );
            }
        }
        Command::Train {
            common,
            language,
            objective,
        } => {
            let config = load(common)?;
            let objective = parse_objective(objective.as_ref())?;
            for outcome in run_train(&config, language.as_ref(), objective)? {
                println!(
                    "train {} {}: {} epochs, best val mAP {:.4}, final loss {:.4}",
                    outcome.language,
                    outcome.objective,
                    outcome.epochs,
                    outcome.best_val_map,
                    outcome.final_train_loss
                );
            }
        }
        Command::Embed {
            common,
            stimuli,
            encoder,
            objective,
        } => {
            let config = load(common)?;
            let objective = parse_objective(objective.as_ref())?;
            for outcome in run_embed(&config, stimuli.as_ref(), encoder.as_ref(), objective)? {
                println!(
                    "embed {} stimuli under {} {}: {} x {}",
                    outcome.stimuli, outcome.encoder, outcome.objective, outcome.dim, outcome.segments
                );
            }
        }
        Command::Eval {
            common,
            language,
            objective,
        } => {
            let config = load(common)?;
            let objective = parse_objective(objective.as_ref())?;
            for report in run_eval(&config, language.as_ref(), objective)? {
                println!(
                    "eval {} {}: mAP {:.4} over {} queries (chance {:.4})",
                    report.language, report.objective, report.map, report.n_queries, report.baseline
                );
            }
        }
        Command::Analyze { common } => {
            let config = load(common)?;
            let outcome = run_analyze(&config)?;
            println!(
                "analyze: {} embeddings, {} similarity matrices, {} dendrograms, {} cross-model tables; {}/{} distance-rank predictions held",
                outcome.embeddings,
                outcome.xrsms,
                outcome.dendrograms,
                outcome.cross_model_tables,
                outcome.orderings_held,
                outcome.orderings_total
            );
        }
        Command::Report { common } => {
            let config = load(common)?;
            print!("{}", run_report(&config)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
