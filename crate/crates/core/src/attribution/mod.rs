//! Source and target value distributions.
//!
//! The source distribution counts tokens per value. The target distribution
//! comes from one of two matchers: exact k-gram matching against per-value
//! source text ([`rule`]) or per-value similarity scores turned into a
//! distribution by a temperature softmax ([`neural`]).

pub mod neural;
pub mod rule;
pub mod sidecar;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_distribution, Provenance, Sample, ValueDistribution};

pub use neural::{
    precomputed_match, scorer_match, softmax_distribution, Direction, PrecomputedScores, ScoreRequest, ScoreVector,
    Scorer, MIN_TEMPERATURE,
};
pub use rule::{rule_match, SourceIndex};
pub use sidecar::SidecarScorer;

/// Lowercases and splits on anything that is not alphanumeric.
///
/// Whitespace and punctuation both separate tokens, and fragments made only
/// of punctuation vanish. `"Claritin, on deck!"` becomes
/// `["claritin", "on", "deck"]`.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAssignment {
    /// The k-gram, tokens joined by a single space.
    pub token: String,
    pub position: usize,
    /// Indices into the attribute's values; empty when hallucinated.
    pub matched_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub target_distribution: ValueDistribution,
    pub assignments: Vec<TokenAssignment>,
    /// Fraction of summary k-grams attributable to no value.
    pub hallucination_mass: f64,
    pub matcher_id: String,
}

/// Proportion of source tokens written by each value.
pub fn source_distribution(sample: &Sample) -> Result<ValueDistribution> {
    let mut counts = vec![0.0; sample.attribute.arity()];
    for unit in &sample.units {
        let k = sample
            .attribute
            .index_of(&unit.value)
            .ok_or_else(|| Error::Config(format!("sample {:?}: unknown value {:?}", sample.id, unit.value)))?;
        counts[k] += tokenize(&unit.text).len() as f64;
    }
    if counts.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroMass(format!("sample {:?} has no source tokens", sample.id)));
    }
    normalize_distribution(&counts, Provenance::Source)
}
