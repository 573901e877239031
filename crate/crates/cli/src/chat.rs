use std::io::{IsTerminal, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use eliza_api::{Backend, CreateSession, MessageReply, TuringRequest, Word};
use eliza_client::{Client, ClientError};
use eliza_core::word::{join, words};
use eliza_service::{AppState, Scripts};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::net::TcpListener;

use crate::{load_script, MechanismArgs};

fn is_client_error(e: &ClientError) -> bool {
    e.status().is_some_and(|s| s.is_client_error())
}

#[derive(Args)]
pub struct ChatArgs {
    /// Script to chat with; defaults to a script sampled with default settings.
    #[arg(long, env = "ELIZA_SCRIPT")]
    script: Option<PathBuf>,
    /// Use a running service instead of an in-process one.
    #[arg(long)]
    server: Option<String>,
    /// Script id on the server (defaults to the server's default script).
    #[arg(long)]
    script_id: Option<String>,
    #[arg(long, default_value = "engine")]
    model: Backend,
    /// Print the matched template, states, rule index and queue.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    mechanism: MechanismArgs,
}

#[derive(Args)]
pub struct TuringArgs {
    /// `increment` or `parity`.
    #[arg(long, default_value = "increment")]
    fixture: String,
    /// Initial tape, space separated.
    #[arg(long, default_value = "x $")]
    tape: String,
    /// Maximum number of generation cycles.
    #[arg(long, default_value_t = 100)]
    budget: usize,
    #[arg(long)]
    server: Option<String>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, env = "ELIZA_SCRIPT")]
    script: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

fn scripts(path: Option<&PathBuf>) -> Result<Scripts> {
    let default = match path {
        Some(p) => Some(("default".to_string(), load_script(p)?)),
        None => None,
    };
    Ok(Scripts::with_fixtures(default))
}

/// Client for `server`, or for a service started on an ephemeral local port.
async fn connect(server: Option<String>, script: Option<&PathBuf>) -> Result<Client> {
    if let Some(url) = server {
        return Ok(Client::new(url));
    }
    let listener = TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let state = AppState::new(scripts(script)?);
    tokio::spawn(eliza_service::serve(listener, state));
    Ok(Client::new(format!("http://{addr}")))
}

fn print_trace(r: &MessageReply) {
    let t = &r.trace;
    println!("  template {} ({:?}), rule {}", t.matched_template, t.turn_type, t.rule_index);
    let states: Vec<String> = t.states.iter().map(usize::to_string).collect();
    println!("  states   {}", states.join(" "));
    for turn in r.turns.iter().skip(1).rev().skip(1).rev() {
        println!("  tape     {}", join(&turn.tokens));
    }
    let queue: Vec<String> = t.queue.iter().map(|q| format!("[{}]", join(&q.tokens))).collect();
    println!("  queue    {}", queue.join(" "));
    if !r.divergence.equal {
        let other = match (&r.divergence.construction_reply, &r.divergence.construction_error) {
            (Some(c), _) => join(c),
            (None, Some(e)) => format!("error: {e}"),
            (None, None) => String::new(),
        };
        println!("  diverged engine `{}` construction `{other}`", join(&r.divergence.engine_reply));
    }
}

pub async fn chat(a: ChatArgs) -> Result<()> {
    let client = connect(a.server, a.script.as_ref()).await?;
    let req = CreateSession { script_id: a.script_id, mechanism_config: a.mechanism.config()?, backend: a.model };
    let session = client.create_session(&req).await.context("cannot open a session")?;
    let interactive = std::io::stdin().is_terminal();
    if interactive {
        println!("vocabulary: {}", join(&session.vocab));
    }
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    loop {
        if interactive {
            print!("u: ");
            std::io::stdout().flush()?;
        }
        let Some(line) = lines.next_line().await? else { break };
        let tokens: Vec<Word> = words(line.trim());
        if tokens.is_empty() {
            continue;
        }
        match client.send(session.session_id, tokens).await {
            Ok(r) => {
                println!("e: {}", join(&r.reply));
                if a.trace {
                    print_trace(&r);
                }
            }
            Err(e) if is_client_error(&e) => eprintln!("warning: {e}"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub async fn turing(a: TuringArgs) -> Result<()> {
    let client = connect(a.server, None).await?;
    let r = client.turing(&TuringRequest { fixture: a.fixture, tape: words(&a.tape), budget: a.budget }).await?;
    let (last, steps) = r.trace.split_last().context("empty trace")?;
    for (i, tape) in steps.iter().enumerate() {
        println!("cycle {:>3}: {}", i + 1, join(tape));
    }
    println!("halted after {} cycles: {}", r.steps, join(last));
    if !r.equal {
        println!("construction trace differs:");
        for t in &r.construction_trace {
            println!("  {}", join(t));
        }
    }
    Ok(())
}

pub async fn serve(a: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let state = AppState::new(scripts(a.script.as_ref())?);
    let listener = TcpListener::bind((a.host.as_str(), a.port))
        .await
        .with_context(|| format!("cannot bind {}:{}", a.host, a.port))?;
    eliza_service::serve(listener, state).await?;
    Ok(())
}
