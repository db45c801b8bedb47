//! Artifact writers: long-format CSV with a commented provenance header,
//! plus a JSON sidecar embedding the resolved configuration.

use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};
use zrp_core::{CoreError, Result};

use crate::config::ExperimentConfig;

/// One emitted measurement: system size, quantity name, value.
#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub n: u32,
    pub quantity: String,
    pub value: f64,
}

pub fn row(n: u32, quantity: impl Into<String>, value: f64) -> Row {
    Row {
        n,
        quantity: quantity.into(),
        value,
    }
}

/// Collected output of one subcommand run.
#[derive(Debug, Serialize)]
pub struct Artifacts {
    pub subcommand: String,
    pub config_hash: String,
    pub rows: Vec<Row>,
    /// Subcommand-specific structured report, when one exists.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub report: serde_json::Value,
}

impl Artifacts {
    pub fn new(subcommand: &str, cfg: &ExperimentConfig) -> Self {
        Artifacts {
            subcommand: subcommand.to_string(),
            config_hash: cfg.content_hash(),
            rows: Vec::new(),
            report: serde_json::Value::Null,
        }
    }

    pub fn push(&mut self, r: Row) {
        self.rows.push(r);
    }

    pub fn attach_report<T: Serialize>(&mut self, report: &T) -> Result<()> {
        self.report = serde_json::to_value(report)
            .map_err(|e| CoreError::numeric(format!("report serialization: {e}")))?;
        Ok(())
    }

    /// Comment header: provenance lines only, all prefixed by `#`.  The
    /// body below it is a pure function of the configuration.
    pub fn csv(&self, cfg: &ExperimentConfig) -> String {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "# tool: zrp {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# subcommand: {}", self.subcommand);
        let _ = writeln!(out, "# config_hash: {}", self.config_hash);
        let _ = writeln!(out, "# seed: {}", cfg.seed);
        let _ = writeln!(out, "# log_base: natural");
        let _ = writeln!(out, "# created_unix: {stamp}");
        out.push_str("n,quantity,value\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.n, r.quantity, r.value);
        }
        out
    }

    /// JSON sidecar: resolved config, hash, rows, and the report.
    pub fn json(&self, cfg: &ExperimentConfig) -> Result<String> {
        let doc = serde_json::json!({
            "tool": format!("zrp {}", env!("CARGO_PKG_VERSION")),
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "config": cfg,
            "rows": self.rows,
            "report": self.report,
        });
        serde_json::to_string_pretty(&doc)
            .map_err(|e| CoreError::numeric(format!("artifact serialization: {e}")))
    }

    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CoreError::resource(format!("out dir {}: {e}", dir.display())))?;
        let csv_path = dir.join(format!("{}.csv", self.subcommand));
        let json_path = dir.join(format!("{}.json", self.subcommand));
        std::fs::write(&csv_path, self.csv(cfg))
            .map_err(|e| CoreError::resource(format!("write {}: {e}", csv_path.display())))?;
        std::fs::write(&json_path, self.json(cfg)?)
            .map_err(|e| CoreError::resource(format!("write {}: {e}", json_path.display())))?;
        Ok((csv_path, json_path))
    }
}

/// The CSV body: every line not starting with `#`.  Two runs with one
/// config must agree on this byte for byte.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}
