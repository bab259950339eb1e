//! Experiment reports: tables, fits and verdicts.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Written as `# ` lines after the rows.
    pub footer: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let mut out = w.into_inner().context("flushing csv")?;
        for f in &self.footer {
            out.extend_from_slice(format!("# {f}\n").as_bytes());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub anchor: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub tables: Vec<Table>,
    pub fits: BTreeMap<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    pub wall_clock_s: f64,
}

impl Report {
    pub fn new(experiment: &str, anchor: &str, config: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            experiment: experiment.into(),
            anchor: anchor.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            seed,
            tables: Vec::new(),
            fits: BTreeMap::new(),
            verdicts: Vec::new(),
            all_pass: true,
            wall_clock_s: 0.0,
        }
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn fit(&mut self, key: &str, v: impl Serialize) -> Result<()> {
        self.fits.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.all_pass &= pass;
        self.verdicts.push(Verdict {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    /// `<dir>/report.json` plus one CSV per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            std::fs::write(&p, t.to_csv()?).with_context(|| format!("writing {}", p.display()))?;
        }
        let p = dir.join("report.json");
        std::fs::write(&p, serde_json::to_vec_pretty(self)?).with_context(|| format!("writing {}", p.display()))?;
        Ok(())
    }
}
