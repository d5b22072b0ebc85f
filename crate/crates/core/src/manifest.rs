//! Cohort manifests: one JSON array entry per child, pointing at per-symbol
//! trace files relative to the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::trace::{parse_trace, SymbolId, Trace};

pub const MIN_AGE_MONTHS: u32 = 78;
pub const MAX_AGE_MONTHS: u32 = 192;

#[derive(Debug, Clone, PartialEq)]
pub struct ChildRecord {
    pub child_id: String,
    pub age_months: u32,
    pub grade: u8,
    pub dysgraphia: bool,
    /// Indexed by [`SymbolId::index`]; `None` marks a symbol the child did not write.
    pub traces: Vec<Option<Trace>>,
}

impl ChildRecord {
    pub fn new(child_id: impl Into<String>, age_months: u32, grade: u8, dysgraphia: bool) -> Self {
        ChildRecord {
            child_id: child_id.into(),
            age_months,
            grade,
            dysgraphia,
            traces: vec![None; SymbolId::COUNT],
        }
    }

    pub fn trace(&self, symbol: SymbolId) -> Option<&Trace> {
        self.traces[symbol.index()].as_ref()
    }

    pub fn set_trace(&mut self, trace: Trace) {
        let i = trace.symbol().index();
        self.traces[i] = Some(trace);
    }

    pub fn written_symbols(&self) -> impl Iterator<Item = SymbolId> + '_ {
        SymbolId::all().filter(|s| self.traces[s.index()].is_some())
    }

    pub fn missing_count(&self) -> usize {
        self.traces.iter().filter(|t| t.is_none()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }
}

/// Ordered `(symbol, path)` pairs; duplicates are kept so they can be reported.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceRefs(pub Vec<(String, String)>);

impl Serialize for TraceRefs {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for TraceRefs {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RefsVisitor;
        impl<'de> Visitor<'de> for RefsVisitor {
            type Value = TraceRefs;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from symbol to relative trace path")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<TraceRefs, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    pairs.push((k, v));
                }
                Ok(TraceRefs(pairs))
            }
        }
        deserializer.deserialize_map(RefsVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub child_id: String,
    pub age_months: u32,
    pub grade: u8,
    pub dysgraphia: bool,
    pub traces: TraceRefs,
}

pub fn parse_manifest(content: &[u8]) -> Result<Vec<ManifestEntry>> {
    Ok(serde_json::from_slice(content)?)
}

/// Parse a manifest and every trace it references. Relative paths resolve
/// against `base_dir`.
pub fn load_manifest(content: &[u8], base_dir: &Path) -> Result<Vec<ChildRecord>> {
    let entries = parse_manifest(content)?;
    let mut seen_children = std::collections::HashSet::new();
    let mut records = Vec::with_capacity(entries.len());
    for entry in entries {
        if !seen_children.insert(entry.child_id.clone()) {
            return Err(Error::Manifest(format!(
                "duplicate child_id {:?}",
                entry.child_id
            )));
        }
        if !(1..=9).contains(&entry.grade) {
            return Err(Error::Manifest(format!(
                "child {:?}: grade {} outside 1..9",
                entry.child_id, entry.grade
            )));
        }
        if entry.age_months == 0 {
            return Err(Error::Manifest(format!(
                "child {:?}: age must be positive",
                entry.child_id
            )));
        }
        if !(MIN_AGE_MONTHS..=MAX_AGE_MONTHS).contains(&entry.age_months) {
            log::warn!(
                "child {:?}: age {} months outside [{MIN_AGE_MONTHS}, {MAX_AGE_MONTHS}]",
                entry.child_id,
                entry.age_months
            );
        }
        let mut record = ChildRecord::new(
            entry.child_id.clone(),
            entry.age_months,
            entry.grade,
            entry.dysgraphia,
        );
        for (key, rel) in &entry.traces.0 {
            let symbol: SymbolId = key.parse()?;
            if record.trace(symbol).is_some() {
                return Err(Error::DuplicateEntry {
                    child_id: entry.child_id.clone(),
                    symbol,
                });
            }
            let path = base_dir.join(rel);
            if !path.is_file() {
                return Err(Error::DanglingPath(path));
            }
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let trace = parse_trace(symbol, &bytes).map_err(|e| {
                Error::Manifest(format!("{}: {e}", path.display()))
            })?;
            record.set_trace(trace);
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_manifest_file(path: &Path) -> Result<Vec<ChildRecord>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    load_manifest(&bytes, &base)
}

/// Relative path used for a child's trace file when writing a cohort.
pub fn trace_rel_path(child_id: &str, symbol: SymbolId) -> PathBuf {
    PathBuf::from("traces").join(child_id).join(format!("{symbol}.csv"))
}

/// Write traces under `dir/traces/<child>/<symbol>.csv` and `dir/manifest.json`.
pub fn write_cohort(dir: &Path, children: &[ChildRecord]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(children.len());
    for child in children {
        let mut refs = TraceRefs::default();
        for symbol in child.written_symbols() {
            let rel = trace_rel_path(&child.child_id, symbol);
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            let trace = child.trace(symbol).expect("written symbol has a trace");
            std::fs::write(&path, trace.to_csv()).map_err(|e| Error::io(&path, e))?;
            refs.0.push((symbol.to_string(), rel.to_string_lossy().replace('\\', "/")));
        }
        entries.push(ManifestEntry {
            child_id: child.child_id.clone(),
            age_months: child.age_months,
            grade: child.grade,
            dysgraphia: child.dysgraphia,
            traces: refs,
        });
    }
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&entries)?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

/// Class balance and missing-symbol rates of a cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSummary {
    pub n_td: usize,
    pub n_dys: usize,
    /// Fraction of TD children with at least one missing symbol.
    pub td_missing_rate: f64,
    pub dys_missing_rate: f64,
}

impl CohortSummary {
    pub fn of(children: &[ChildRecord]) -> Self {
        let (mut n_td, mut n_dys, mut td_na, mut dys_na) = (0usize, 0usize, 0usize, 0usize);
        for c in children {
            let incomplete = !c.is_complete();
            if c.dysgraphia {
                n_dys += 1;
                dys_na += usize::from(incomplete);
            } else {
                n_td += 1;
                td_na += usize::from(incomplete);
            }
        }
        let rate = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        CohortSummary {
            n_td,
            n_dys,
            td_missing_rate: rate(td_na, n_td),
            dys_missing_rate: rate(dys_na, n_dys),
        }
    }

    pub fn dys_fraction(&self) -> f64 {
        let n = self.n_td + self.n_dys;
        if n == 0 {
            0.0
        } else {
            self.n_dys as f64 / n as f64
        }
    }
}
