//! `episodic`: build memory stores, query them, chat with a persona,
//! compare persona modes and serve the HTTP API.
//!
//! Exit codes: 0 on success, 1 on user error (bad flags, unreadable or
//! malformed input), 2 on internal or provider failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use episodic_core::persona::PersonaMode;
use episodic_core::ranking::Expansion;

#[derive(Debug, Parser)]
#[command(name = "episodic", version, about = "Episodic memory personae")]
struct Cli {
    /// JSON application config (providers, gazetteer, k, profile, retrieval).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Replay LLM replies from a stub script instead of the configured provider.
    #[arg(long, global = true, value_name = "SCRIPT")]
    stub: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the augmentation pipeline over a corpus and save the store.
    Augment {
        /// Biography segments as JSONL.
        #[arg(long)]
        corpus: PathBuf,
        /// Store file to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-record provenance JSONL to write.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Embed corpus segments as they are into a raw store.
    IngestRaw {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve memories for one query.
    Query {
        /// `fixture`, `fixture-raw` or a store file.
        #[arg(long, default_value = "fixture")]
        store: String,
        #[arg(long)]
        text: String,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Talk to the persona; one message per line on stdin.
    Chat {
        #[arg(long, value_enum, default_value_t = ModeArg::Autonoesis)]
        mode: ModeArg,
        /// Store for retrieving modes; defaults to the fixture of the right kind.
        #[arg(long)]
        store: Option<String>,
        /// Persona profile JSON; the config's or the bundled one otherwise.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Write the session transcript here on exit.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Answer every query under every persona mode and report side by side.
    Eval {
        /// One query per line.
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeMatrix::All)]
        mode_matrix: ModeMatrix,
        /// Augmented store for the autonoesis modes.
        #[arg(long, default_value = "fixture")]
        store: String,
        /// Raw store for the traditional mode.
        #[arg(long, default_value = "fixture-raw")]
        raw_store: String,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        /// Include retrieval latencies (the output is then not reproducible).
        #[arg(long)]
        timings: bool,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        retrieval: RetrievalArgs,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory stores are loaded from and saved to.
        #[arg(long)]
        store_dir: Option<PathBuf>,
        /// Do not preload the bundled fixture stores.
        #[arg(long)]
        no_fixture: bool,
    },
}

/// Overrides for the configured retrieval parameters.
#[derive(Debug, Clone, Default, Args)]
struct RetrievalArgs {
    #[arg(long)]
    max_entries: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum)]
    expansion: Option<ExpansionArg>,
    #[arg(long)]
    no_emotional: bool,
    #[arg(long)]
    no_spatial: bool,
    #[arg(long)]
    no_temporal: bool,
    /// Multiply in each record's relevance score.
    #[arg(long)]
    relevance: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExpansionArg {
    FullScan,
    #[value(name = "graph-1hop", alias = "graph_1hop")]
    Graph1Hop,
}

impl From<ExpansionArg> for Expansion {
    fn from(e: ExpansionArg) -> Self {
        match e {
            ExpansionArg::FullScan => Expansion::FullScan,
            ExpansionArg::Graph1Hop => Expansion::Graph1Hop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Baseline,
    #[value(alias = "traditional_rag")]
    TraditionalRag,
    Autonoesis,
    #[value(alias = "autonoesis_ranked_data")]
    AutonoesisRankedData,
}

impl From<ModeArg> for PersonaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Baseline => PersonaMode::Baseline,
            ModeArg::TraditionalRag => PersonaMode::TraditionalRag,
            ModeArg::Autonoesis => PersonaMode::Autonoesis,
            ModeArg::AutonoesisRankedData => PersonaMode::AutonoesisRankedData,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeMatrix {
    /// All four modes per query.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    #[value(alias = "markdown-table", alias = "md")]
    Markdown,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::User(e) | Failure::Internal(e) => e,
        }
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
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::INFO)
        .init();
    let json = cli.json;
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let e = failure.error();
            if json {
                let body = serde_json::json!({
                    "error": format!("{e:#}"),
                    "exit_code": failure.code(),
                });
                eprintln!("{body}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(failure.code())
        }
    }
}
