//! Nondominated archive and its JSON-lines persistence.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::mech::{ConstraintReport, DesignVector, DimensionVector};

use super::{dominates, quantize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    /// Evaluation index at which the entry was found.
    pub evaluation: u64,
    /// Evaluations spent when the archive was written.
    pub evaluations_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: u64,
    pub design: DesignVector,
    pub dims: DimensionVector,
    pub mean_lift: f64,
    pub mean_power: f64,
    pub fti_cr: f64,
    pub amplitude_deg: f64,
    pub peak_torque: f64,
    pub constraint_report: ConstraintReport,
    pub provenance: Provenance,
}

impl ArchiveEntry {
    pub fn objectives(&self) -> (f64, f64) {
        (self.mean_lift, self.mean_power)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("archive io: {0}")]
    Io(#[from] std::io::Error),
    #[error("archive line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
}

/// Mutually nondominated feasible designs (maximize lift, minimize power).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    next_id: u64,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&ArchiveEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    fn contains_design(&self, d: &DesignVector) -> bool {
        let k = quantize(d);
        self.entries.iter().any(|e| quantize(&e.design) == k)
    }

    /// Insert unless dominated or duplicate; evicts entries the newcomer dominates.
    /// Returns whether the entry was kept. The id field is reassigned.
    pub fn insert(&mut self, mut entry: ArchiveEntry) -> bool {
        let o = entry.objectives();
        if self.contains_design(&entry.design) || self.entries.iter().any(|e| dominates(e.objectives(), o)) {
            return false;
        }
        self.entries.retain(|e| !dominates(o, e.objectives()));
        entry.id = self.next_id;
        self.next_id += 1;
        self.entries.push(entry);
        self.entries.sort_by(|a, b| a.mean_lift.total_cmp(&b.mean_lift).then(a.id.cmp(&b.id)));
        true
    }

    pub fn evaluations_total(&self) -> u64 {
        self.entries.iter().map(|e| e.provenance.evaluations_total).max().unwrap_or(0)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W, evaluations_total: u64) -> Result<(), ArchiveError> {
        for e in &self.entries {
            let mut e = e.clone();
            e.provenance.evaluations_total = evaluations_total;
            serde_json::to_writer(&mut w, &e).map_err(|source| ArchiveError::Parse { line: 0, source })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Blank lines and `#` header lines are skipped.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, ArchiveError> {
        let mut entries: Vec<ArchiveEntry> = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let e: ArchiveEntry =
                serde_json::from_str(&line).map_err(|source| ArchiveError::Parse { line: i + 1, source })?;
            if seen.insert(e.id) {
                entries.push(e);
            }
        }
        let next_id = entries.iter().map(|e| e.id + 1).max().unwrap_or(0);
        entries.sort_by(|a, b| a.mean_lift.total_cmp(&b.mean_lift).then(a.id.cmp(&b.id)));
        Ok(Self { entries, next_id })
    }
}
