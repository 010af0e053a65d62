use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "touchgrid", version, about = "Touch-event curation pipeline")]
pub struct Cli {
    /// Pipeline config (JSON). Environment variables prefixed TOUCHGRID_ override it.
    #[arg(long, global = true, env = "TOUCHGRID_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a per-frame feature CSV into a feature store.
    Ingest(IngestArgs),
    /// Expand base features into the engineered matrix.
    Featgen(FeatgenArgs),
    /// Train a boosted-tree classifier.
    Train(TrainArgs),
    /// Per-frame touch probabilities and calls.
    Predict(PredictArgs),
    /// Event-level error report of predictions against truth.
    Score(ScoreArgs),
    /// Recursive feature elimination, optionally followed by a hyperparameter search.
    SelectFeatures(SelectArgs),
    /// Choose frames for curation along the pole position.
    Sample(SampleArgs),
    /// Adapt a model to a new session from curated frames.
    Retrain(RetrainArgs),
    /// Touch-aligned PSTH and touch-neuron detection.
    Psth(PsthArgs),
    /// HTTP service for the curation UI.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV with header `session_id,video_id,frame_idx,<features...>`; empty or `nan` cells are undefined.
    #[arg(long)]
    pub csv: PathBuf,
    /// Label file whose labels are attached to the rows.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeatgenArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Selection JSON from `select-features`; keeps only its columns.
    #[arg(long)]
    pub select: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub valid: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration training log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Truth label files, one per session.
    #[arg(long, required = true, num_args = 1..)]
    pub truth: Vec<PathBuf>,
    /// Label or prediction files, paired in order with `--truth`.
    #[arg(long, required = true, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Median-smoothing window for label-file predictions.
    #[arg(long)]
    pub smooth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run the random hyperparameter search on the selected columns.
    #[arg(long)]
    pub search: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Session manifest JSON.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Label file supplying pole-in-reach masks; without it every frame is in reach.
    #[arg(long)]
    pub reach: Option<PathBuf>,
    /// Session bundle manifest for `serve`.
    #[arg(long)]
    pub out: PathBuf,
    /// Pre-filled, all-unlabeled label file for the sampled videos.
    #[arg(long)]
    pub out_labels: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrainArgs {
    /// Base model; its training config seeds the retraining config.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub base_train: PathBuf,
    #[arg(long)]
    pub base_valid: PathBuf,
    /// Engineered features of the new session.
    #[arg(long)]
    pub session: PathBuf,
    /// Curated label file for the session.
    #[arg(long)]
    pub labels: PathBuf,
    /// Session bundle listing the sampled frames; every listed frame must be labeled.
    /// Without it, all labeled frames are used.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Held-out labeled feature stores to evaluate before and after.
    #[arg(long, num_args = 0..)]
    pub holdout: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub eval_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PsthArgs {
    /// Spike counts, JSON or CSV.
    #[arg(long)]
    pub spikes: PathBuf,
    /// Label file whose touches give the onsets.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub ci: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory with session.json, labels.json, frames/<video_id>.wfrm and optional predictions.json.
    #[arg(long)]
    pub session_dir: PathBuf,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
}
