use std::path::Path;

use anyhow::{Context, Result};
use eliza_core::analysis::Bucket;
use eliza_core::datagen::{sha256_hex, GENERATOR_VERSION};
use serde::Serialize;
use serde_json::Value;

/// Every JSON report carries the generator version, the run configuration
/// and its hash.
#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub generator_version: &'static str,
    pub command: &'a str,
    pub config: Value,
    pub config_sha256: String,
    pub result: &'a T,
}

pub fn write_report<T: Serialize>(path: &Path, command: &str, config: impl Serialize, result: &T) -> Result<()> {
    let config = serde_json::to_value(config)?;
    let report = Report {
        generator_version: GENERATOR_VERSION,
        command,
        config_sha256: sha256_hex(config.to_string().as_bytes()),
        config,
        result,
    };
    let text = serde_json::to_string_pretty(&report)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Left-aligned first column, right-aligned rest.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out
}

pub fn bucket_row(name: impl Into<String>, b: &Bucket) -> Vec<String> {
    vec![name.into(), b.n.to_string(), format!("{:.4}", b.full_accuracy), format!("{:.4}", b.prefix_accuracy)]
}
