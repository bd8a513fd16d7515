//! Exact k-gram matching of summary text against per-value source text.

use std::collections::HashMap;

use super::{tokenize, AttributionResult, TokenAssignment};
use crate::error::{Error, Result};
use crate::model::{normalize_distribution, Provenance, Sample, SplitMode, SummaryRecord};

/// The set of values whose source text contains each k-gram.
///
/// k-grams are formed inside a unit and never span two units.
#[derive(Debug, Clone)]
pub struct SourceIndex {
    k: usize,
    arity: usize,
    kgrams: HashMap<Vec<String>, Vec<usize>>,
}

impl SourceIndex {
    pub fn build(sample: &Sample, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k-gram size must be at least 1".into()));
        }
        let mut kgrams: HashMap<Vec<String>, Vec<usize>> = HashMap::new();
        for unit in &sample.units {
            let value = sample
                .attribute
                .index_of(&unit.value)
                .ok_or_else(|| Error::Config(format!("sample {:?}: unknown value {:?}", sample.id, unit.value)))?;
            let tokens = tokenize(&unit.text);
            for window in tokens.windows(k) {
                let owners = kgrams.entry(window.to_vec()).or_default();
                if let Err(pos) = owners.binary_search(&value) {
                    owners.insert(pos, value);
                }
            }
        }
        Ok(Self {
            k,
            arity: sample.attribute.arity(),
            kgrams,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Values (sorted indices) whose source contains `kgram`.
    pub fn owners(&self, kgram: &[String]) -> &[usize] {
        self.kgrams.get(kgram).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn attribute(&self, summary: &SummaryRecord, split: SplitMode) -> Result<AttributionResult> {
        let tokens = tokenize(&summary.text);
        if tokens.is_empty() {
            return Err(Error::EmptySummary {
                system: summary.system.clone(),
            });
        }

        let mut counts = vec![0.0; self.arity];
        let mut assignments = Vec::with_capacity(tokens.len());
        let mut unmatched = 0usize;
        for (position, window) in tokens.windows(self.k).enumerate() {
            let owners = self.owners(window);
            if owners.is_empty() {
                unmatched += 1;
            } else {
                let share = match split {
                    SplitMode::Fractional => 1.0 / owners.len() as f64,
                    SplitMode::Full => 1.0,
                };
                for &v in owners {
                    counts[v] += share;
                }
            }
            assignments.push(TokenAssignment {
                token: window.join(" "),
                position,
                matched_values: owners.to_vec(),
            });
        }

        if assignments.len() == unmatched {
            return Err(Error::ZeroMass(format!(
                "no {}-gram of the {:?} summary appears in the source",
                self.k, summary.system
            )));
        }
        let target_distribution = normalize_distribution(&counts, Provenance::Target)?;
        Ok(AttributionResult {
            target_distribution,
            hallucination_mass: unmatched as f64 / assignments.len() as f64,
            assignments,
            matcher_id: format!("rule-k{}", self.k),
        })
    }
}

/// Builds an index for `sample` and attributes one summary.
pub fn rule_match(sample: &Sample, summary: &SummaryRecord, k: usize, split: SplitMode) -> Result<AttributionResult> {
    SourceIndex::build(sample, k)?.attribute(summary, split)
}
