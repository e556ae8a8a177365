use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smsl::{commands, report, CliError, ExperimentConfig, Overrides};

/// Soft-label metric learning experiments on synthetic video–text data.
///
/// Log verbosity is read from SMSL_LOG (error, warn, info, debug, trace).
/// Exit codes: 0 ok, 1 usage or IO error, 2 training diverged, 3 data mismatch.
#[derive(Parser)]
#[command(name = "smsl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the generator seed (gen-data) or training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's paths.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenData(Common),
    /// Train one model and write a checkpoint, history and report.
    Train(Common),
    /// Evaluate a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory; defaults to the config's dataset path.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Add horizontally flipped clips to the video features.
        #[arg(long)]
        flip: bool,
    },
    /// Train every configured loss and print a comparison table.
    Compare(Common),
    /// Sum similarity matrices and evaluate the ensemble.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Relevancy matrix (.csv or SSL1 binary).
        #[arg(long)]
        relevancy: PathBuf,
        /// Similarity matrices (.csv or SSL1 binary).
        #[arg(required = true)]
        matrices: Vec<PathBuf>,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides {
        seed: c.seed,
        out: c.out.clone(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = ExperimentConfig::load_or_default(c.config.as_deref())?;
            let (dir, _) = commands::cmd_gen_data(&cfg, &overrides(&c))?;
            println!("{}", dir.display());
        }
        Command::Train(c) => {
            let cfg = ExperimentConfig::load_or_default(c.config.as_deref())?;
            let summary = commands::cmd_train(&cfg, &overrides(&c))?;
            print!("{}", report::text_block(&summary.report));
        }
        Command::Eval {
            common,
            checkpoint,
            dataset,
            flip,
        } => {
            let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
            let dataset = dataset.unwrap_or_else(|| cfg.paths.dataset.clone());
            let r = commands::cmd_eval(
                &checkpoint,
                &dataset,
                flip,
                cfg.train.relevance_threshold,
                common.out.as_deref(),
            )?;
            print!("{}", report::text_block(&r));
        }
        Command::Compare(c) => {
            let cfg = ExperimentConfig::load_or_default(c.config.as_deref())?;
            let rows = commands::cmd_compare(&cfg, &overrides(&c))?;
            let table: Vec<report::Row> = rows
                .iter()
                .map(|r| report::row(&r.label, &r.report))
                .collect();
            print!("{}", report::text_table(&table));
        }
        Command::Ensemble {
            common,
            relevancy,
            matrices,
        } => {
            let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
            let outcome = commands::cmd_ensemble(
                &matrices,
                &relevancy,
                cfg.train.relevance_threshold,
                common.out.as_deref(),
            )?;
            print!("{}", report::text_table(&outcome.rows()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMSL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
