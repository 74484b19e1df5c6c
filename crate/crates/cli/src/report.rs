//! Two-part reports: human-readable `key=value` lines followed by one
//! machine-readable JSON line. Reports carry no timing or other
//! run-varying data, so a rerun with identical arguments produces
//! identical bytes.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MACHINE_MARKER: &str = "--- machine ---";

#[derive(Default)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn render<M: Serialize>(&self, machine: &M) -> Result<String> {
        let mut out = String::new();
        for (key, value) in &self.lines {
            out.push_str(key);
            out.push('=');
            out.push_str(value);
            out.push('\n');
        }
        out.push_str(MACHINE_MARKER);
        out.push('\n');
        out.push_str(&serde_json::to_string(machine).context("serializing machine report")?);
        out.push('\n');
        Ok(out)
    }

    /// Print to stdout and, when requested, write the same bytes to a file.
    pub fn emit<M: Serialize>(&self, machine: &M, output: Option<&Path>) -> Result<()> {
        let rendered = self.render(machine)?;
        print!("{rendered}");
        if let Some(path) = output {
            fs::write(path, &rendered)
                .with_context(|| format!("writing report to {}", path.display()))?;
        }
        Ok(())
    }
}
