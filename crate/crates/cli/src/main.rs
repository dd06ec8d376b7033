use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use continuum_cli::{pipeline, CliError, RunConfig};

/// HSIC-regularized Wasserstein auto-encoder on synthetic blob images.
///
/// Exit codes: 0 success, 1 configuration or usage error, 2 I/O error,
/// 3 numeric abort.
#[derive(Debug, Parser)]
#[command(name = "continuum", version)]
struct Cli {
    /// JSON run configuration (unknown keys are rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides "seed" in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides "out_dir" in the config (default: run).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render the synthetic dataset to <data_dir> (PGM images + manifest.csv).
    GenData,
    /// Train on the generated dataset; writes metrics.csv and checkpoint.txt.
    Train,
    /// Evaluate a checkpoint on the test split; writes <out_dir>/eval/.
    Eval {
        /// Checkpoint to evaluate (default: <out_dir>/checkpoint.txt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print HSIC_b (or MMD² with --mmd) between two CSV matrices as JSON.
    Hsic {
        x: PathBuf,
        y: PathBuf,
        /// rbf (median trick), rbf:<sigma_sq> or imq.
        #[arg(long, default_value = "rbf")]
        kernel: String,
        /// Permutations for the p-value; 0 disables the test.
        #[arg(long, short = 'B', default_value_t = 0)]
        permutations: usize,
        /// Unbiased MMD² between the two (unpaired) samples instead of HSIC.
        #[arg(long)]
        mmd: bool,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| cfg.out_dir());
    match cli.command {
        Command::GenData => pipeline::gen_data(&cfg, &out_dir),
        Command::Train => pipeline::train_run(&cfg, &out_dir),
        Command::Eval { checkpoint } => pipeline::eval_run(&cfg, &out_dir, checkpoint.as_deref()),
        Command::Hsic {
            x,
            y,
            kernel,
            permutations,
            mmd,
        } => pipeline::hsic_run(&x, &y, &kernel, permutations, mmd, cfg.seed.unwrap_or(0)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
