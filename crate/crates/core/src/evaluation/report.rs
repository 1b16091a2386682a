use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentConfig, Recipe};
use crate::error::{config_err, Result};

/// A CSV-shaped result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.header.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of `column` in rows whose `key` column equals `value`.
    pub fn select(&self, key: &str, value: &str, column: &str) -> Vec<&str> {
        let (Some(k), Some(c)) = (self.column(key), self.column(column)) else {
            return Vec::new();
        };
        self.rows.iter().filter(|r| r[k] == value).map(|r| r[c].as_str()).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::PalsError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub recipe: Recipe,
    pub seeds: Vec<u64>,
    pub config_snapshot: String,
    pub status: RunStatus,
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

impl ExperimentReport {
    pub fn new(recipe: Recipe, config: &ExperimentConfig) -> Result<Self> {
        let config_snapshot =
            toml::to_string(config).map_err(|e| config_err(format!("cannot serialize config: {e}")))?;
        Ok(ExperimentReport {
            recipe,
            seeds: config.seeds.clone(),
            config_snapshot,
            status: RunStatus::Completed,
            tables: Vec::new(),
            summary: Vec::new(),
        })
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self.status, RunStatus::Skipped { .. })
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "recipe = {:?}", self.recipe.name());
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = [{}]", seeds.join(", "));
        match &self.status {
            RunStatus::Completed => {
                let _ = writeln!(s, "status = \"completed\"");
            }
            RunStatus::Skipped { reason } => {
                let _ = writeln!(s, "status = \"skipped\"\nreason = {reason:?}");
            }
        }
        let tables: Vec<String> = self.tables.iter().map(|t| format!("{:?}", format!("{}.csv", t.name))).collect();
        let _ = writeln!(s, "tables = [{}]", tables.join(", "));
        let _ = writeln!(s, "\n[results]");
        for line in &self.summary {
            let _ = writeln!(s, "# {line}");
        }
        s
    }

    /// Writes `config.toml`, one CSV per table and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.toml"), &self.config_snapshot)?;
        for t in &self.tables {
            std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
        }
        std::fs::write(dir.join("summary.txt"), self.summary_text())?;
        Ok(())
    }
}

/// Creates `parent/run-<name>-<unix seconds>-<seed>`, adding a numeric
/// suffix if that directory already exists.
pub fn create_run_dir(parent: &Path, name: &str, seed: u64) -> Result<PathBuf> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = format!("run-{name}-{stamp}-{seed}");
    std::fs::create_dir_all(parent)?;
    let mut dir = parent.join(&base);
    let mut n = 1;
    while dir.exists() {
        dir = parent.join(format!("{base}.{n}"));
        n += 1;
    }
    std::fs::create_dir(&dir)?;
    Ok(dir)
}
