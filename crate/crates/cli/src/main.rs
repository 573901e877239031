mod batch;
mod chat;
mod gen;
mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use eliza_core::construction::{Copying, Cycling, Memory, MechanismConfig};
use eliza_core::Script;

#[derive(Parser)]
#[command(name = "eliza", version, about = "ELIZA interpreter, construction simulator and data tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scripts and datasets.
    #[command(subcommand)]
    Gen(gen::GenCommand),
    /// Talk to ELIZA through the session service.
    Chat(chat::ChatArgs),
    /// Diff the construction against gold transcripts.
    Verify(batch::VerifyArgs),
    /// Score predictions against a dataset.
    Eval(batch::EvalArgs),
    /// Run counterfactual edits and classify the continuations.
    Counterfactual(batch::CounterfactualArgs),
    /// Compare copying mechanisms across concentration levels.
    Matrix(batch::MatrixArgs),
    /// Run a Turing-machine fixture through the service.
    Turing(chat::TuringArgs),
    /// Serve the session API.
    Serve(chat::ServeArgs),
}

/// Mechanism selection shared by every subcommand that runs the construction.
#[derive(Args, Clone, Debug)]
pub struct MechanismArgs {
    /// `position` or `induction[:N]`.
    #[arg(long, default_value = "position")]
    copying: Copying,
    /// `intermediate` or `modular`.
    #[arg(long, default_value = "intermediate")]
    cycling: Cycling,
    /// `intermediate` or `gridworld[:S]`.
    #[arg(long, default_value = "intermediate")]
    memory: Memory,
    /// Skip the generation-time label correction.
    #[arg(long)]
    no_correct_labels: bool,
    /// Match with one layer per wildcard.
    #[arg(long)]
    reduced_layers: bool,
}

impl MechanismArgs {
    pub fn config(&self) -> Result<MechanismConfig> {
        let cfg = MechanismConfig {
            copying: self.copying,
            cycling: self.cycling,
            memory: self.memory,
            correct_labels: !self.no_correct_labels,
            reduced_layers: self.reduced_layers,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `--script`, falling back to `ELIZA_SCRIPT`.
#[derive(Args, Clone, Debug)]
pub struct ScriptArg {
    #[arg(long, env = "ELIZA_SCRIPT")]
    script: PathBuf,
}

pub fn load_script(path: &Path) -> Result<Script> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read script {}", path.display()))?;
    Script::parse(&text).with_context(|| format!("invalid script {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(c) => gen::run(c),
        Command::Verify(a) => batch::verify(a),
        Command::Eval(a) => batch::eval(a),
        Command::Counterfactual(a) => batch::counterfactual(a),
        Command::Matrix(a) => batch::matrix(a),
        Command::Chat(a) => runtime()?.block_on(chat::chat(a)),
        Command::Turing(a) => runtime()?.block_on(chat::turing(a)),
        Command::Serve(a) => runtime()?.block_on(chat::serve(a)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Runtime::new()?)
}
