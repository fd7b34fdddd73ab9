//! The `ste-skill` command line.

pub mod adapt;
pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::classify::ClassifierKind;
use crate::error::Error;
pub use config::{PipelineConfig, TdSetting};

#[derive(Debug, Parser)]
#[command(name = "ste-skill", version, about = "STE connectivity features and skill classification for eSports sensor data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// kill, death, assist, all, or a `+`-joined combination.
    #[arg(long, global = true)]
    pub events: Option<String>,
    #[arg(long, global = true)]
    pub classifier: Option<ClassifierKind>,
    /// Half window 1..=10, or `tune`.
    #[arg(long, global = true)]
    pub td: Option<TdSetting>,
    /// Manifest path, overriding the config.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a raw per-device directory tree into a manifest corpus.
    AdaptDataset {
        #[arg(long)]
        input: PathBuf,
        /// Manifest file to write; data files go next to it.
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the STE feature matrix for the configured t_d and events.
    Features,
    /// Run the t_d tuning procedure.
    TuneTd,
    /// Rank the distinguishing features.
    Select,
    /// K-fold cross-validated evaluation.
    Evaluate,
    /// Leave-one-subject-out evaluation.
    Loso,
    /// Two-component PCA projection of the feature matrix.
    Pca,
    /// Tuned evaluation for every event filter and classifier, the t_d
    /// sweep, LOSO and the feature ranking in one run.
    Report,
    /// Write a small synthetic corpus for trying the pipeline.
    SynthFixture {
        #[arg(long)]
        output: PathBuf,
        /// Write the raw per-device layout instead of a manifest corpus.
        #[arg(long)]
        raw: bool,
        #[arg(long, default_value_t = 4)]
        matches: usize,
        #[arg(long, default_value_t = 2)]
        players: usize,
        /// Events per player.
        #[arg(long, default_value_t = 48)]
        events_per_player: usize,
        /// Recording length in seconds.
        #[arg(long, default_value_t = 600)]
        duration: usize,
    },
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<Error>() {
        Some(e) => e.kind(),
        None => "error",
    }
}

/// Joins the cause chain, skipping causes whose text a parent already includes.
pub fn error_message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

/// Parses arguments, runs the command and reports failures as one line of
/// JSON on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = writeln!(std::io::stderr(), "{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let _ = writeln!(std::io::stderr(), "{}", error_json(error_kind(&err), &error_message(&err)));
            ExitCode::FAILURE
        }
    }
}
