use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Debug, Parser)]
#[command(
    name = "vowelmark",
    version,
    about = "Sustained-vowel feature extraction and LDA screening"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Corpus manifest (CSV with subject_id, vowel, label, path).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Feature table; defaults to `<out>/features.csv`.
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = vowelmark::model::DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 8)]
    pub folds: usize,
    #[arg(long, global = true, default_value_t = 40)]
    pub reps: usize,
    /// Feature ranking method.
    #[arg(long = "fs", global = true, value_enum, default_value_t = FsMethod::Lasso)]
    pub fs: FsMethod,
    #[arg(long, global = true, default_value_t = vowelmark::select::DEFAULT_K_NEIGHBORS)]
    pub k_neighbors: usize,
    /// File listing feature names to use, one per line.
    #[arg(long, global = true)]
    pub subset: Option<PathBuf>,
    /// File listing subject ids to keep, one per line.
    #[arg(long, global = true)]
    pub subjects: Option<PathBuf>,
    /// Keep only HC subjects and ALS subjects with recent diagnosis.
    #[arg(long, global = true)]
    pub early: bool,
    /// Leave-one-subject-out instead of repeated k-fold.
    #[arg(long, global = true)]
    pub loso: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// More log output (repeatable); `VOWELMARK_LOG` overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FsMethod {
    Qov,
    Relief,
    Relieff,
    Lasso,
}

impl From<FsMethod> for vowelmark::select::Method {
    fn from(m: FsMethod) -> Self {
        use vowelmark::select::Method;
        match m {
            FsMethod::Qov => Method::QoV,
            FsMethod::Relief => Method::Relief,
            FsMethod::Relieff => Method::RelieFF,
            FsMethod::Lasso => Method::Lasso,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or validate a manifest.
    Ingest {
        /// Directory of WAV recordings to index instead of `--manifest`.
        root: Option<PathBuf>,
    },
    /// Extract the feature table from the manifest.
    Extract,
    /// Correlation survey and per-class densities.
    Survey {
        /// Number of top-ranked features to export densities for.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Rank features; optionally refine the top N by backward selection.
    Select {
        #[arg(long)]
        bss: Option<usize>,
    },
    /// Train the final model on all rows.
    Train,
    /// Validate the LDA on the selected features.
    Cv,
    /// Rank, sweep subset sizes, refine the best subset and train.
    Pipeline {
        /// Largest subset size in the sweep (default: all features).
        #[arg(long)]
        max_n: Option<usize>,
    },
    /// Apply a trained model to the table.
    Report {
        /// Model file; defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VOWELMARK_LOG", default))
        .format_timestamp(None)
        .init();
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<vowelmark::Error>() {
            return if e.is_input_error() { 1 } else { 2 };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging(cli.common.verbose);
    if cli.common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global()
        {
            log::warn!("thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
