//! CSV/JSON serialization with a commented config echo.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::Config;

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Header block: a title plus the resolved config, every line behind `# `.
///
/// Stripping the leading `# ` from each line yields valid TOML (the title
/// becomes a TOML comment), so the echo feeds straight back into `--config`.
pub fn header(title: &[String], config: &Config) -> String {
    let mut out = String::new();
    for line in title {
        out.push_str("# # ");
        out.push_str(line);
        out.push('\n');
    }
    for line in config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Recovers the TOML text from a header written by [`header`].
#[cfg(test)]
pub fn strip_header(text: &str) -> String {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").unwrap_or(l.trim_start_matches('#')))
        .collect::<Vec<_>>()
        .join("\n")
}

pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, header_text: &str) -> Result<()> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        let body = writer.into_inner().context("flushing CSV buffer")?;
        let mut bytes = header_text.as_bytes().to_vec();
        bytes.extend_from_slice(&body);
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

pub fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
