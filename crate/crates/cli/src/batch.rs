use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use eliza_core::analysis::{self, EditKind, EditSpec, PredictionRecord};
use eliza_core::construction::{Copying, MechanismConfig};
use eliza_core::datagen::{self, CopySpec};
use serde::Serialize;
use serde_json::json;

use crate::output::{bucket_row, table, write_report};
use crate::{load_script, MechanismArgs, ScriptArg};

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    script: ScriptArg,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    mechanism: MechanismArgs,
    /// Conversations whose first divergence is traced.
    #[arg(long, default_value_t = 5)]
    traces: usize,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn verify(a: VerifyArgs) -> Result<()> {
    let script = load_script(&a.script.script)?;
    let data = datagen::read_jsonl(&a.data)?;
    let cfg = a.mechanism.config()?;
    let r = analysis::verify(&script, &cfg, &data, a.traces)?;
    let mut rows = vec![
        vec!["all".to_string(), r.overall.turns.to_string(), r.overall.mismatches.to_string()],
        vec!["ambiguous".into(), r.ambiguous.turns.to_string(), r.ambiguous.mismatches.to_string()],
        vec!["repeated 2-gram".into(), r.repeated_2gram.turns.to_string(), r.repeated_2gram.mismatches.to_string()],
    ];
    rows.extend(r.by_turn_type.iter().map(|(t, v)| vec![t.clone(), v.turns.to_string(), v.mismatches.to_string()]));
    print!("{}", table(&["turns", "n", "mismatches"], &rows));
    for d in &r.first_divergences {
        println!(
            "conversation {} turn {} token {}: gold `{}` predicted `{}`",
            d.conversation_id,
            d.turn_index,
            d.position,
            eliza_core::word::join(&d.gold),
            eliza_core::word::join(&d.predicted)
        );
        if let Some(t) = &d.trace {
            println!("  {}", serde_json::to_string(t)?);
        }
    }
    if let Some(out) = &a.out {
        write_report(out, "verify", json!({ "mechanism": cfg, "data": a.data, "script": a.script.script }), &r)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Predictions JSONL `{conversation_id, turn_index, tokens}`.
    #[arg(long, conflicts_with = "construction")]
    predictions: Option<PathBuf>,
    /// Score the construction instead (needs --script).
    #[arg(long, requires = "script")]
    construction: bool,
    #[arg(long, env = "ELIZA_SCRIPT")]
    script: Option<PathBuf>,
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let data = datagen::read_jsonl(&a.data)?;
    let (preds, source) = match (&a.predictions, a.construction) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            (datagen::parse_jsonl::<PredictionRecord>(p, &text)?, json!({ "predictions": p }))
        }
        (None, true) => {
            let path = a.script.as_ref().expect("clap requires --script");
            let cfg = a.mechanism.config()?;
            let preds = analysis::construction_predictions_all(&load_script(path)?, &cfg, &data)?;
            (preds, json!({ "construction": cfg }))
        }
        (None, false) => bail!("give --predictions or --construction"),
    };
    let r = analysis::score(&data, &preds)?;
    let mut rows = vec![bucket_row("all", &r.overall)];
    rows.extend(r.by_turn_type.iter().map(|(t, b)| bucket_row(t.clone(), b)));
    print!("{}", table(&["turns", "n", "full", "prefix"], &rows));
    for (axis, buckets) in &r.correlates {
        println!("\n{axis}");
        let rows: Vec<_> = buckets.iter().map(|(k, b)| bucket_row(k.to_string(), b)).collect();
        print!("{}", table(&["value", "n", "full", "prefix"], &rows));
    }
    if let Some(out) = &a.out {
        write_report(out, "eval", json!({ "data": a.data, "source": source }), &r)?;
    }
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Cycle,
    Memory,
}

#[derive(Args)]
pub struct CounterfactualArgs {
    #[command(flatten)]
    script: ScriptArg,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, required_unless_present = "specs")]
    kind: Option<Kind>,
    /// Edits to sample, uniformly over valid edits.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run these edit specs (JSONL) instead of sampling.
    #[arg(long)]
    specs: Option<PathBuf>,
    #[command(flatten)]
    mechanism: MechanismArgs,
    /// Outcome JSONL, one line per edit.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OutcomeLine<'a> {
    spec: &'a EditSpec,
    tokens: Vec<eliza_core::Word>,
    #[serde(flatten)]
    outcome: analysis::CounterfactualOutcome,
}

pub fn counterfactual(a: CounterfactualArgs) -> Result<()> {
    let script = load_script(&a.script.script)?;
    let data = datagen::read_jsonl(&a.data)?;
    let cfg = a.mechanism.config()?;
    let specs = match (&a.specs, a.kind) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            datagen::parse_jsonl::<EditSpec>(p, &text)?
        }
        (None, Some(k)) => {
            let kind = match k {
                Kind::Cycle => EditKind::CycleEdit,
                Kind::Memory => EditKind::MemoryEdit,
            };
            analysis::sample_edits(&script, &data, kind, a.n, a.seed)
        }
        (None, None) => bail!("give --kind or --specs"),
    };
    let mut lines = Vec::with_capacity(specs.len());
    let mut outcomes = Vec::with_capacity(specs.len());
    for spec in &specs {
        let (tokens, outcome) = analysis::run_edit(&script, &cfg, &data, spec)?;
        outcomes.push(outcome);
        lines.push(serde_json::to_string(&OutcomeLine { spec, tokens, outcome })?);
    }
    let summary = analysis::summarize(&outcomes);
    let rows: Vec<_> = summary.counts.iter().map(|(c, n)| vec![format!("{c:?}"), n.to_string()]).collect();
    print!("{}", table(&["classification", "n"], &rows));
    println!("{} edits, {} full matches", summary.n, summary.full_match);
    if let Some(out) = &a.out {
        let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
        fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
        let config = json!({ "mechanism": cfg, "data": a.data, "seed": a.seed, "n": a.n });
        write_report(&datagen::manifest_path(out), "counterfactual", config, &summary)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct MatrixArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,1,0.1,0.01")]
    alphas: Vec<f64>,
    /// Copying mechanisms to compare.
    #[arg(long, value_delimiter = ',', default_value = "position,induction:2")]
    copying: Vec<Copying>,
    #[arg(long, default_value_t = 5000)]
    n_eval: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn matrix(a: MatrixArgs) -> Result<()> {
    let sets = a
        .alphas
        .iter()
        .map(|&alpha| {
            let spec = CopySpec { concentration: alpha, n_train: 0, n_eval: a.n_eval, seed: a.seed, ..Default::default() };
            Ok((alpha, datagen::copy_dataset(&spec)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = sets.iter().map(|(alpha, d)| (*alpha, &d.script, d.eval.as_slice())).collect();
    let mechanisms: Vec<_> =
        a.copying.iter().map(|&copying| MechanismConfig { copying, ..Default::default() }).collect();
    let cells = analysis::mechanism_matrix(&refs, &mechanisms)?;
    let rows: Vec<_> = cells
        .iter()
        .map(|c| {
            vec![
                c.mechanism.clone(),
                c.alpha.to_string(),
                format!("{:.4}", c.overall.full_accuracy),
                format!("{:.4} ({})", c.no_repeated_2gram.full_accuracy, c.no_repeated_2gram.n),
                format!("{:.4} ({})", c.repeated_2gram.full_accuracy, c.repeated_2gram.n),
            ]
        })
        .collect();
    print!("{}", table(&["mechanism", "alpha", "accuracy", "no repeat", "repeat"], &rows));
    if let Some(out) = &a.out {
        let config = json!({ "alphas": a.alphas, "copying": a.copying.iter().map(|c| c.to_string()).collect::<Vec<_>>(), "n_eval": a.n_eval, "seed": a.seed });
        write_report(out, "matrix", config, &cells)?;
    }
    Ok(())
}
