// SPDX-License-Identifier: MIT OR Apache-2.0

use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "lancet", version, about = "Sparse concept decomposition and transplant for latent-space editing")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = "LANCET_CONFIG")]
    pub config: Option<PathBuf>,

    /// Base URL of a running service; an in-process one is started otherwise.
    #[arg(long, global = true, env = "LANCET_SERVER")]
    pub server: Option<String>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Validate and print the requests that would be sent, without sending them.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Treat a decomposition that did not converge as a failure (exit 4).
    #[arg(long, global = true)]
    pub strict: bool,

    /// Sparsity weight.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,

    /// L1 share of the penalty, in [0, 1].
    #[arg(long, global = true)]
    pub rho: Option<f64>,

    /// Embedding cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,

    /// Recorded model exchanges (file or directory) to mine against offline.
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,

    /// Log more (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Avg,
    Pca,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Replace,
    Add,
    Remove,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concept lists and insertion rewrites from a vision-language model.
    #[command(subcommand)]
    Concepts(ConceptsCommand),

    /// Stimulus synthesis.
    #[command(subcommand)]
    Stimuli(StimuliCommand),

    /// Embed every concept's stimuli into one matrix file per concept.
    Embed(EmbedArgs),

    /// Dictionary construction.
    #[command(subcommand)]
    Dict(DictCommand),

    /// Split a source latent over a dictionary.
    Decompose(DecomposeArgs),

    /// Transplant one concept and write the edited latent.
    Edit(EditArgs),

    /// One edited latent per strength on a grid.
    Sweep(SweepArgs),

    /// Largest coefficients of a decomposition.
    Report(ReportArgs),

    /// Fixed-strength vector-addition baseline.
    VecAdd(VecAddArgs),

    /// Run the HTTP service in the foreground.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum ConceptsCommand {
    /// List the concepts present in a task's source prompt (and image).
    Parse(TaskArgs),
    /// Rewrite an insertion task so the target has a source counterpart.
    Rewrite(TaskArgs),
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Task JSON with the source and target prompts.
    #[arg(long)]
    pub task: PathBuf,
    /// Also write the result here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum StimuliCommand {
    /// Write a concept dataset with synthesized stimuli.
    Gen(StimuliGenArgs),
}

#[derive(Debug, Args)]
pub struct StimuliGenArgs {
    /// JSON list of names, a `{"concepts": [...]}` object, or one name per line.
    #[arg(long)]
    pub concepts: PathBuf,
    /// Dataset path; the configured dataset path if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory; the configured matrices directory if absent.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DictCommand {
    /// Read one vector per concept and stack them into a dictionary.
    Build(DictBuildArgs),
}

#[derive(Debug, Args)]
pub struct DictBuildArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Scale every non-null column to unit length.
    #[arg(long)]
    pub normalize: bool,
    /// Column order, comma separated; put the edit's source concept first.
    #[arg(long, value_delimiter = ',')]
    pub order: Option<Vec<String>>,
    /// Append a null-concept column from the encoder's empty-string embedding.
    #[arg(long)]
    pub null: bool,
    /// Manifest path; the matrix is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Matrix file holding the source latent (flattened row-major).
    #[arg(long)]
    pub source: PathBuf,
    /// Dictionary manifest.
    #[arg(long)]
    pub dict: PathBuf,
    /// Where to write the decomposition JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Entries in the embedded report.
    #[arg(long)]
    pub k: Option<usize>,
}

/// Where the target concept's vector comes from.
#[derive(Debug, Args)]
pub struct TargetArgs {
    /// Concept whose vector is transplanted in; looked up in the target or main dictionary.
    #[arg(long)]
    pub target_concept: Option<String>,
    /// Matrix file holding the target vector.
    #[arg(long)]
    pub target_vector: Option<PathBuf>,
    /// A second dictionary that contains the target concept.
    #[arg(long)]
    pub target_dict: Option<PathBuf>,
    /// Matrix file holding the null-concept vector, for removals.
    #[arg(long)]
    pub null_vector: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// Dictionary manifest used for the decomposition.
    #[arg(long)]
    pub dict: PathBuf,
    /// Decomposition JSON written by `decompose`.
    #[arg(long)]
    pub decomp: PathBuf,
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Concept to replace, remove, or (for `add`) the counterpart to swap out.
    #[arg(long)]
    pub source_concept: String,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Matrix file for the edited latent.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dictionary manifest used for the decomposition.
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub decomp: PathBuf,
    #[arg(long, value_enum, default_value = "replace")]
    pub kind: Kind,
    #[arg(long)]
    pub source_concept: String,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Edit strengths, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub grid: Vec<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Decomposition JSON written by `decompose`.
    #[arg(long)]
    pub decomp: PathBuf,
    /// Number of entries to list.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VecAddArgs {
    /// Matrix file holding the source latent (flattened row-major).
    #[arg(long)]
    pub source: PathBuf,
    /// Dictionary manifest.
    #[arg(long)]
    pub dict: PathBuf,
    /// Concept to move toward.
    #[arg(long)]
    pub toward: String,
    /// Concept to move away from.
    #[arg(long)]
    pub away_from: String,
    /// Dictionary to look up concepts missing from `--dict`.
    #[arg(long)]
    pub target_dict: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub strength: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}
