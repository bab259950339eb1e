//! Flat `key=value` parameters with typed accessors.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    map: BTreeMap<String, String>,
}

/// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value, got '{raw}'", no + 1))?;
        out.push((normalize_key(k.trim()), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

/// Parses `--key value` and `--key=value` pairs.
pub fn parse_flags(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| anyhow!("expected --key, got '{a}'"))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((normalize_key(k), v.to_string()));
        } else {
            let v = it.next().ok_or_else(|| anyhow!("--{key} needs a value"))?;
            out.push((normalize_key(key), v.clone()));
        }
    }
    Ok(out)
}

/// Lower case with `-` mapped to `_`.
pub fn normalize_key(k: &str) -> String {
    k.to_ascii_lowercase().replace('-', "_")
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut p = Self::new();
        for (k, v) in pairs {
            p.set(k, v);
        }
        p
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(normalize_key(key), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.map
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| anyhow!("missing parameter '{key}'"))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.str(key)?;
        s.parse::<T>().map_err(|e| anyhow!("parameter '{key}' = '{s}': {e}"))
    }

    /// Accepts `inf` and `pi` multiples such as `4pi`.
    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.str(key)?).with_context(|| format!("parameter '{key}'"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.str(key)?
            .split(',')
            .map(|s| parse_f64(s.trim()))
            .collect::<Result<_>>()
            .with_context(|| format!("parameter '{key}'"))
    }

    /// `a:b[:step]` (inclusive) or a comma list.
    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        let v = self.i64_list(key)?;
        v.into_iter()
            .map(|x| usize::try_from(x).map_err(|_| anyhow!("parameter '{key}': negative entry {x}")))
            .collect()
    }

    /// `a:b[:step]` in either direction (inclusive) or a comma list.
    pub fn i64_list(&self, key: &str) -> Result<Vec<i64>> {
        parse_int_list(self.str(key)?).with_context(|| format!("parameter '{key}'"))
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    match t.as_str() {
        "inf" | "infinity" => return Ok(f64::INFINITY),
        "pi" => return Ok(std::f64::consts::PI),
        _ => {}
    }
    if let Some(m) = t.strip_suffix("pi") {
        let c: f64 = m.parse().map_err(|_| anyhow!("bad number '{s}'"))?;
        return Ok(c * std::f64::consts::PI);
    }
    t.parse::<f64>().map_err(|_| anyhow!("bad number '{s}'"))
}

pub fn parse_int_list(s: &str) -> Result<Vec<i64>> {
    let s = s.trim();
    let num = |x: &str| x.trim().parse::<i64>().map_err(|_| anyhow!("bad integer '{x}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 1 {
        return s.split(',').map(num).collect();
    }
    if parts.len() > 3 {
        bail!("bad range '{s}'");
    }
    let a = num(parts[0])?;
    let b = num(parts[1])?;
    let step = if parts.len() == 3 { num(parts[2])? } else { 1 };
    if step <= 0 {
        bail!("range step must be positive in '{s}'");
    }
    let mut out = Vec::new();
    if a <= b {
        let mut x = a;
        while x <= b {
            out.push(x);
            x += step;
        }
    } else {
        let mut x = a;
        while x >= b {
            out.push(x);
            x -= step;
        }
        out.reverse();
    }
    Ok(out)
}
