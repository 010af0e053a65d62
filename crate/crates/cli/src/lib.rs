//! Command-line pipeline and curation HTTP service.

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod provenance;
pub mod server;

use cli::{Cli, Command};
use config::PipelineConfig;
use error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), std::env::vars())?;
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&cfg, a),
        Command::Featgen(a) => commands::featgen(&cfg, a),
        Command::Train(a) => commands::train(&cfg, a),
        Command::Predict(a) => commands::predict(&cfg, a),
        Command::Score(a) => commands::score(&cfg, a),
        Command::SelectFeatures(a) => commands::select_features(&cfg, a),
        Command::Sample(a) => commands::sample(&cfg, a),
        Command::Retrain(a) => commands::retrain_cmd(&cfg, a),
        Command::Psth(a) => commands::psth(&cfg, a),
        Command::Serve(a) => {
            let bind = a.bind.clone().unwrap_or_else(|| cfg.serve.bind.clone());
            server::serve(&a.session_dir, &bind, a.port.unwrap_or(cfg.serve.port))
        }
    }
}
