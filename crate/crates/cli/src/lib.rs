//! Named experiment presets over `mfcz-core` with flat `key=value` configuration and
//! CSV/JSON reports.
//!
//! Parameters are layered: preset defaults, then an optional config file, then command-line
//! flags. Every key must be known to the preset, and the merged set is validated before any
//! compute. A run writes one CSV per table plus `report.json` holding the config echo, seed,
//! fits, verdicts and wall-clock time.

pub mod inputs;
pub mod params;
pub mod presets;
pub mod report;

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};

pub use params::Params;
pub use presets::{Preset, CATALOG};
pub use report::Report;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub anchor: &'static str,
    pub description: &'static str,
}

pub fn list_experiments() -> Vec<CatalogEntry> {
    CATALOG
        .iter()
        .map(|p| CatalogEntry {
            name: p.name,
            anchor: p.anchor,
            description: p.description,
        })
        .collect()
}

fn lookup(name: &str) -> Result<&'static Preset> {
    match presets::find(name) {
        Some(p) => Ok(p),
        None => {
            let names: Vec<&str> = CATALOG.iter().map(|p| p.name).collect();
            bail!("unknown experiment '{name}'; available: {}", names.join(", "))
        }
    }
}

/// Defaults overlaid with `overrides` in order; unknown keys are rejected.
pub fn resolve(name: &str, overrides: &[(String, String)]) -> Result<(&'static Preset, Params)> {
    let preset = lookup(name)?;
    let mut p = Params::from_pairs(preset.defaults.iter().copied());
    for (k, v) in overrides {
        if !p.contains(k) {
            let known: Vec<&str> = preset.defaults.iter().map(|d| d.0).collect();
            bail!("{name}: unknown parameter '{k}' (known: {})", known.join(", "));
        }
        p.set(k, v);
    }
    Ok((preset, p))
}

/// Resolves and validates without computing.
pub fn validate(name: &str, overrides: &[(String, String)]) -> Result<Params> {
    let (preset, p) = resolve(name, overrides)?;
    (preset.validate)(&p).map_err(|e| e.context(format!("{name}: invalid parameters")))?;
    Ok(p)
}

/// Runs a preset and writes its report to `out_dir` when given.
pub fn run(name: &str, overrides: &[(String, String)], out_dir: Option<&Path>) -> Result<Report> {
    let (preset, p) = resolve(name, overrides)?;
    (preset.validate)(&p).map_err(|e| e.context(format!("{name}: invalid parameters")))?;
    let seed = p.u64("seed")?;
    let mut report = Report::new(preset.name, preset.anchor, p.map().clone(), seed);
    let t0 = Instant::now();
    (preset.run)(&p, &mut report).map_err(|e| e.context(format!("{name} failed")))?;
    report.wall_clock_s = t0.elapsed().as_secs_f64();
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}
