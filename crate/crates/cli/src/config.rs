//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; lists are comma separated and `a..b` expands odd widths.
//!
//! Keys: `manifest`, `output`, `pairs`, `w_max`, `dist`, `alpha`, `seed`,
//! `folds`, `keep_incomplete`, `selection`, `trees`, `jobs`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};

use pomh_core::pomh::DistanceKind;
use pomh_learn::glm::Selection;
use pomh_pipeline::sweep::SweepConfig;
use pomh_pipeline::MethodPair;

pub const KEYS: [&str; 12] = [
    "manifest",
    "output",
    "pairs",
    "w_max",
    "dist",
    "alpha",
    "seed",
    "folds",
    "keep_incomplete",
    "selection",
    "trees",
    "jobs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            output: None,
            sweep: SweepConfig::default(),
            jobs: None,
        }
    }
}

pub fn parse_kv(content: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in content.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {line:?}", n + 1))?;
        let k = k.trim().replace('-', "_");
        if !KEYS.contains(&k.as_str()) {
            bail!("line {}: unknown key {k:?} (known: {})", n + 1, KEYS.join(", "));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key {k:?}", n + 1);
        }
    }
    Ok(out)
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

pub fn parse_widths(v: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().with_context(|| format!("bad width {a:?}"))?;
            let b: usize = b.trim_start_matches('=').trim().parse().with_context(|| format!("bad width {b:?}"))?;
            out.extend((a..=b).filter(|w| w % 2 == 1));
        } else {
            out.push(part.parse().with_context(|| format!("bad width {part:?}"))?);
        }
    }
    Ok(out)
}

pub fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("expected a boolean, got {v:?}"),
    }
}

impl RunConfig {
    /// Apply `key = value` settings over the current values.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            let ctx = || format!("config key {k}");
            match k.as_str() {
                "manifest" => self.manifest = Some(PathBuf::from(v)),
                "output" => self.output = Some(PathBuf::from(v)),
                "pairs" => {
                    self.sweep.pairs = list(v, |s| s.parse::<MethodPair>().map_err(Into::into)).with_context(ctx)?
                }
                "w_max" => self.sweep.w_max_grid = parse_widths(v).with_context(ctx)?,
                "dist" => {
                    self.sweep.kinds = list(v, |s| s.parse::<DistanceKind>().map_err(|e| anyhow!(e))).with_context(ctx)?
                }
                "alpha" => self.sweep.alphas = list(v, |s| s.parse::<f64>().map_err(Into::into)).with_context(ctx)?,
                "seed" => self.sweep.seed = v.parse().with_context(ctx)?,
                "folds" => self.sweep.folds = v.parse().with_context(ctx)?,
                "keep_incomplete" => self.sweep.layers.keep_incomplete = parse_bool(v).with_context(ctx)?,
                "selection" => {
                    let s: Selection = v.parse().map_err(|e| anyhow!("{e}")).with_context(ctx)?;
                    if !matches!(s, Selection::Aic | Selection::Bic | Selection::Stepwise) {
                        bail!("selection must be aic, bic or stepwise");
                    }
                    self.sweep.layers.selection = s;
                }
                "trees" => self.sweep.layers.n_trees = v.parse().with_context(ctx)?,
                "jobs" => self.jobs = Some(v.parse().with_context(ctx)?),
                _ => unreachable!("keys checked at parse time"),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep.validate()?;
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        Ok(())
    }
}
