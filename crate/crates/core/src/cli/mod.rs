//! The `tangseg` command line.
//!
//! Exit codes: 0 on success, 1 when the pipeline fails, 2 for bad
//! configuration, arguments or paths.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{config_keys, ConfigArgs, RunConfig, CONFIG_FLAGS};

#[derive(Debug, Parser)]
#[command(name = "tangseg", version, about = "Sentence segmentation for classical Chinese")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print character and punctuation counts, one JSON line per corpus
    Stats {
        /// Corpus directories, manifests or files, as PATH or NAME=PATH
        /// (default: registered corpora)
        corpora: Vec<String>,
    },
    /// Split corpora and write labeled training and test portions
    Prepare {
        /// Corpora as PATH or NAME=PATH (default: registered corpora)
        corpora: Vec<String>,
    },
    /// Train character embeddings on the training portions
    Embed {
        /// Corpora as PATH or NAME=PATH (default: registered corpora)
        corpora: Vec<String>,
        /// Also write the vectors in word2vec text format
        #[arg(long)]
        text: bool,
    },
    /// Train the boundary classifier on frozen embeddings
    Train {
        /// Embedding file written by `embed`
        #[arg(long, value_name = "FILE")]
        embeddings: PathBuf,
        /// Corpora as PATH or NAME=PATH (default: registered corpora)
        corpora: Vec<String>,
    },
    /// Punctuate text, inserting 。 after each predicted boundary
    Segment {
        #[arg(long, value_name = "FILE")]
        embeddings: PathBuf,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Input text (default: stdin)
        input: Option<PathBuf>,
        /// Write here instead of stdout
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Score predicted boundaries against gold labels
    Eval {
        /// Gold labels: a .tsv labeled file or punctuated text
        gold: PathBuf,
        /// Predictions in the same formats; omit to predict with a model
        predicted: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "checkpoint", conflicts_with = "predicted")]
        embeddings: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "embeddings")]
        checkpoint: Option<PathBuf>,
    },
    /// Run an experiment manifest over registered corpora
    Matrix {
        /// JSON list of experiments (default: the bundled 24-row grid)
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
    },
    /// Write a synthetic rule corpus, one text file per document
    Synth {
        /// Trigger family: `a` or `b`
        #[arg(long, value_parser = ["a", "b"], default_value = "a")]
        family: String,
        /// Number of documents
        #[arg(long, value_name = "N", default_value_t = 10)]
        docs: usize,
        /// Content characters across all documents
        #[arg(long, value_name = "N", default_value_t = 10_000)]
        chars: usize,
        /// Directory to create
        dir: PathBuf,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let config = match RunConfig::resolve(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    init_logging(config.verbosity);
    match commands::run(&cli.command, &config) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
