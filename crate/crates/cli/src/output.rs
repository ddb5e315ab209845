use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, Comparison::AtMost, value <= threshold)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, Comparison::AtLeast, value >= threshold)
    }

    pub fn equal(name: &str, value: f64, expected: f64) -> Self {
        Self::new(name, value, expected, Comparison::Equal, value == expected)
    }

    fn new(name: &str, value: f64, threshold: f64, comparison: Comparison, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            comparison,
            pass,
        }
    }
}

/// JSON summary written next to every CSV.
#[derive(Debug, Serialize)]
pub struct Summary<P: Serialize> {
    pub experiment: String,
    pub parameters: P,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl<P: Serialize> Summary<P> {
    pub fn new(experiment: &str, parameters: P, files: Vec<String>, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            experiment: experiment.into(),
            parameters,
            files,
            checks,
            pass,
        }
    }

    pub fn print(&self) {
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
                Comparison::Equal => "==",
            };
            println!(
                "{} {:<28} {:.3e} {op} {:.3e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold
            );
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
