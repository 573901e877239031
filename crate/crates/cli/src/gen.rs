use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Subcommand};
use eliza_core::datagen::{self, ConversationSpec, CopySpec, ScriptSpec};

use crate::{load_script, ScriptArg};

#[derive(Subcommand)]
pub enum GenCommand {
    /// Sample a random script.
    Script(ScriptGenArgs),
    /// Sample multi-turn conversations for a script.
    Data(DataArgs),
    /// Sample a single-turn copying dataset at one concentration.
    CopyData(CopyArgs),
}

#[derive(Args)]
pub struct ScriptGenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ScriptSpec::default().n_templates)]
    n_templates: usize,
}

#[derive(Args)]
pub struct DataArgs {
    #[command(flatten)]
    script: ScriptArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = ConversationSpec::default().n_conversations)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ConversationSpec::default().max_tokens)]
    max_tokens: usize,
    /// Dirichlet concentration of ordinary templates.
    #[arg(long, default_value_t = ConversationSpec::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = ConversationSpec::default().memory_alpha)]
    memory_alpha: f64,
    #[arg(long, default_value_t = ConversationSpec::default().max_queue)]
    max_queue: usize,
}

#[derive(Args)]
pub struct CopyArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = CopySpec::default().n_train)]
    n_train: usize,
    #[arg(long, default_value_t = CopySpec::default().n_eval)]
    n_eval: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn run(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Script(a) => {
            let spec = ScriptSpec { n_templates: a.n_templates, seed: a.seed, ..Default::default() };
            let (script, _) = datagen::gen_script(&spec, &a.out)?;
            println!("wrote {} ({} templates)", a.out.display(), script.templates.len());
        }
        GenCommand::Data(a) => {
            let script = load_script(&a.script.script)?;
            let spec = ConversationSpec {
                n_conversations: a.n,
                max_tokens: a.max_tokens,
                alpha: a.alpha,
                memory_alpha: a.memory_alpha,
                max_queue: a.max_queue,
                seed: a.seed,
                ..Default::default()
            };
            let m = datagen::gen_dataset(&script, &a.script.script, &spec, &a.out)?;
            println!("wrote {} ({} conversations)", a.out.display(), m.n_conversations);
            for (t, n) in &m.turn_types {
                println!("  {t:<18} {n}");
            }
        }
        GenCommand::CopyData(a) => {
            let spec = CopySpec { concentration: a.alpha, n_train: a.n_train, n_eval: a.n_eval, seed: a.seed, ..Default::default() };
            let m = datagen::gen_copy_dataset(&spec, &a.out)?;
            println!("wrote {} ({} conversations)", a.out.display(), m.n_conversations);
        }
    }
    Ok(())
}
