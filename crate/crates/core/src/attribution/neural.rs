//! Similarity-score matching: per-value scores through a temperature softmax.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tokenize, AttributionResult};
use crate::error::{Error, Result};
use crate::model::{Provenance, Sample, SummaryRecord, ValueDistribution};

/// Temperatures below this are rejected.
pub const MIN_TEMPERATURE: f64 = 1e-6;

/// `scores[k]` is the affinity between the summary and the source of value k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidScore { index, value });
            }
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `exp(s_k / T) / Σ_j exp(s_j / T)`, shifted by the maximum score.
pub fn softmax_distribution(scores: &ScoreVector, temperature: f64) -> Result<ValueDistribution> {
    if !(temperature.is_finite() && temperature >= MIN_TEMPERATURE) {
        return Err(Error::InvalidTemperature(temperature));
    }
    if scores.is_empty() {
        return Err(Error::ZeroMass("empty score vector".into()));
    }
    for (index, &value) in scores.0.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::InvalidScore { index, value });
        }
    }
    let max = scores.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.0.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    let weights = exps.into_iter().map(|e| e / total).collect();
    ValueDistribution::new(weights, Provenance::Target)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    CandidateGivenSource,
    SourceGivenCandidate,
}

/// One scoring job: a candidate summary against each value's source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub candidate: String,
    pub references: Vec<String>,
    #[serde(default)]
    pub direction: Direction,
}

/// Anything that can score a candidate against per-value references.
pub trait Scorer: Send + Sync {
    fn name(&self) -> &str;

    /// Longest reference, in tokens, the scorer accepts.
    fn max_length(&self) -> Option<usize> {
        None
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreVector>;

    fn score_batch(&self, requests: &[ScoreRequest]) -> Vec<Result<ScoreVector>> {
        requests.iter().map(|r| self.score(r)).collect()
    }
}

fn from_scores(
    sample: &Sample,
    scores: &ScoreVector,
    temperature: f64,
    matcher_id: String,
) -> Result<AttributionResult> {
    if scores.len() != sample.attribute.arity() {
        return Err(Error::DimensionMismatch {
            expected: sample.attribute.arity(),
            found: scores.len(),
        });
    }
    Ok(AttributionResult {
        target_distribution: softmax_distribution(scores, temperature)?,
        assignments: Vec::new(),
        hallucination_mass: 0.0,
        matcher_id,
    })
}

/// Builds the request for one (sample, summary) pair, checking length limits.
pub fn score_request(sample: &Sample, summary: &SummaryRecord, limit: Option<usize>) -> Result<ScoreRequest> {
    if tokenize(&summary.text).is_empty() {
        return Err(Error::EmptySummary {
            system: summary.system.clone(),
        });
    }
    let references = sample.partition_by_value();
    if let Some(limit) = limit {
        for (value_index, text) in references.iter().enumerate() {
            let tokens = tokenize(text).len();
            if tokens > limit {
                return Err(Error::LengthLimit {
                    value_index: Some(value_index),
                    message: format!("{tokens} tokens, limit {limit}"),
                });
            }
        }
    }
    Ok(ScoreRequest {
        candidate: summary.text.clone(),
        references,
        direction: Direction::default(),
    })
}

pub fn scorer_match(
    sample: &Sample,
    summary: &SummaryRecord,
    scorer: &dyn Scorer,
    temperature: f64,
) -> Result<AttributionResult> {
    let request = score_request(sample, summary, scorer.max_length())?;
    let scores = scorer.score(&request)?;
    from_scores(sample, &scores, temperature, format!("scorer-{}", scorer.name()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    sample_id: String,
    system: String,
    scores: Vec<f64>,
}

/// Score vectors keyed by (sample id, system), loaded from a line-delimited file.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedScores {
    scores: HashMap<(String, String), ScoreVector>,
}

impl PrecomputedScores {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut scores = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScoreLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let vector = ScoreVector::new(rec.scores).map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let key = (rec.sample_id, rec.system);
            if scores.contains_key(&key) {
                return Err(Error::Schema {
                    line: lineno,
                    message: format!("duplicate score key ({:?}, {:?})", key.0, key.1),
                });
            }
            scores.insert(key, vector);
        }
        Ok(Self { scores })
    }

    pub fn insert(&mut self, sample_id: impl Into<String>, system: impl Into<String>, scores: ScoreVector) {
        self.scores.insert((sample_id.into(), system.into()), scores);
    }

    pub fn get(&self, sample_id: &str, system: &str) -> Option<&ScoreVector> {
        self.scores.get(&(sample_id.to_string(), system.to_string()))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Same contract as [`scorer_match`], with scores looked up instead of computed.
pub fn precomputed_match(
    sample: &Sample,
    summary: &SummaryRecord,
    store: &PrecomputedScores,
    temperature: f64,
) -> Result<AttributionResult> {
    if tokenize(&summary.text).is_empty() {
        return Err(Error::EmptySummary {
            system: summary.system.clone(),
        });
    }
    let scores = store
        .get(&sample.id, &summary.system)
        .ok_or_else(|| Error::MissingScore {
            sample_id: sample.id.clone(),
            system: summary.system.clone(),
        })?;
    from_scores(sample, scores, temperature, "file".to_string())
}
