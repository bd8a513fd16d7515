//! Report types and their JSON, CSV and markdown renderings.
//!
//! Values are stored at full precision; only the markdown table rounds, to two
//! decimals. Nothing time-dependent goes into a report, so the same corpus and
//! run config always render to the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use fairsumm_core::{FairnessConfig, SampleMetrics};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::pipeline::{Failure, SystemMetrics};

pub const REPORT_SCHEMA: &str = "fairsumm-report/1";
pub const SWEEP_SCHEMA: &str = "fairsumm-sweep/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Md,
}

/// Everything that determines a report's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub input: String,
    pub fairness: FairnessConfig,
    pub lenient_keys: bool,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema: String,
    pub tool_version: String,
    pub run: RunConfig,
    pub input_sha256: String,
    pub systems: Vec<SystemMetrics>,
    pub samples: Vec<SampleMetrics>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub system: String,
    pub n_samples: usize,
    /// Dataset BUR (%) at each τ of the report's `taus`.
    pub bur_pct: Vec<f64>,
    /// Midpoint-grid estimate (%).
    pub auc_pct: f64,
    /// Breakpoint integral (%).
    pub auc_exact_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub tool_version: String,
    pub run: RunConfig,
    pub input_sha256: String,
    pub taus: Vec<f64>,
    pub curves: Vec<SweepCurve>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Two decimals, for tables.
pub fn cell(x: f64) -> String {
    format!("{x:.2}")
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

impl MetricReport {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => to_json(self),
            Format::Csv => self.to_csv(),
            Format::Md => Ok(self.to_markdown()),
        }
    }

    /// One row per evaluated (sample, system) pair.
    pub fn to_csv(&self) -> Result<String> {
        let header = [
            "sample_id",
            "system",
            "matcher",
            "values",
            "source",
            "target",
            "gold",
            "bur",
            "uer",
            "auc",
            "sof",
            "hallucination_mass",
            "underrepresented",
        ];
        let mut rows = vec![header.iter().map(|s| s.to_string()).collect()];
        for m in &self.samples {
            rows.push(vec![
                m.sample_id.clone(),
                m.system.clone(),
                m.matcher_id.clone(),
                m.values.join(";"),
                join(&m.source),
                join(&m.target),
                join(&m.gold),
                m.bur.to_string(),
                m.uer.to_string(),
                m.auc.to_string(),
                m.sof.to_string(),
                m.hallucination_mass.to_string(),
                m.underrepresented_values.join(";"),
            ]);
        }
        csv_string(rows)
    }

    /// Dataset table, one row per system; metrics in percent.
    pub fn to_markdown(&self) -> String {
        let matcher = self.run.fairness.matcher.id();
        let mut s = String::new();
        let _ = writeln!(
            s,
            "| System | N | BUR ({matcher}) | UER ({matcher}) | AUC ({matcher}) | SOF ×100 | Failed |"
        );
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|");
        let mut systems: Vec<&str> = self.systems.iter().map(|m| m.system.as_str()).collect();
        for f in &self.failures {
            if !systems.contains(&f.system.as_str()) {
                systems.push(&f.system);
            }
        }
        systems.sort();
        for system in systems {
            let failed = self.failures.iter().filter(|f| f.system == system).count();
            match self.systems.iter().find(|m| m.system == system) {
                Some(m) => {
                    let d = &m.dataset;
                    let _ = writeln!(
                        s,
                        "| {system} | {} | {} | {} | {} | {} | {failed} |",
                        d.n_samples,
                        cell(d.bur_pct),
                        cell(d.uer_pct),
                        cell(d.auc_pct),
                        cell(d.sof * 100.0)
                    );
                }
                None => {
                    let _ = writeln!(s, "| {system} | 0 | - | - | - | - | {failed} |");
                }
            }
        }
        s
    }
}

impl SweepReport {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => to_json(self),
            Format::Csv => self.to_csv(),
            Format::Md => Ok(self.to_markdown()),
        }
    }

    /// Long format, one row per (system, τ), ready for plotting.
    pub fn to_csv(&self) -> Result<String> {
        let mut rows = vec![vec![
            "system".to_string(),
            "tau".into(),
            "bur_pct".into(),
            "auc_pct".into(),
        ]];
        for c in &self.curves {
            for (tau, bur) in self.taus.iter().zip(&c.bur_pct) {
                rows.push(vec![
                    c.system.clone(),
                    tau.to_string(),
                    bur.to_string(),
                    c.auc_pct.to_string(),
                ]);
            }
        }
        csv_string(rows)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| τ |");
        for c in &self.curves {
            let _ = write!(s, " {} |", c.system);
        }
        s.push_str("\n|---:|");
        s.push_str(&"---:|".repeat(self.curves.len()));
        s.push('\n');
        for (i, tau) in self.taus.iter().enumerate() {
            let _ = write!(s, "| {tau} |");
            for c in &self.curves {
                let _ = write!(s, " {} |", cell(c.bur_pct[i]));
            }
            s.push('\n');
        }
        s.push_str("| AUC |");
        for c in &self.curves {
            let _ = write!(s, " {} |", cell(c.auc_pct));
        }
        s.push('\n');
        s
    }
}

/// Writes to `out`, or stdout when absent.
pub fn write_output(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
