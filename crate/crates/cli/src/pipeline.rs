//! Corpus evaluation: attribution, per-sample metrics and per-system aggregation.

use std::collections::BTreeMap;

use fairsumm_core::attribution::{
    precomputed_match, rule_match, scorer_match, PrecomputedScores, Scorer, SidecarScorer, SourceIndex,
};
use fairsumm_core::metrics::{aggregate, evaluate_sample};
use fairsumm_core::model::{MatcherConfig, SplitMode};
use fairsumm_core::{AttributionResult, DatasetMetrics, FairnessConfig, Sample, SampleMetrics, SummaryRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub enum Matcher {
    Rule { k: usize, split: SplitMode },
    Scorer { scorer: Box<dyn Scorer>, temperature: f64 },
    File { store: PrecomputedScores, temperature: f64 },
}

impl Matcher {
    /// Builds the matcher named by `config`. A scorer matcher launches the
    /// sidecar from `scorer_cmd`, falling back to `FAIRSUMM_SCORER_CMD`.
    pub fn from_config(config: &MatcherConfig, scorer_cmd: Option<&str>) -> Result<Self> {
        Ok(match config {
            MatcherConfig::Rule { k, split } => Matcher::Rule { k: *k, split: *split },
            MatcherConfig::Scorer {
                softmax_temperature, ..
            } => {
                let scorer = match scorer_cmd {
                    Some(cmd) => SidecarScorer::spawn(cmd)?,
                    None => SidecarScorer::from_env()?,
                };
                Matcher::Scorer {
                    scorer: Box::new(scorer),
                    temperature: *softmax_temperature,
                }
            }
            MatcherConfig::File {
                path,
                softmax_temperature,
            } => Matcher::File {
                store: PrecomputedScores::load(path).map_err(|e| match e {
                    fairsumm_core::Error::Io(io) => CliError::io(path, io),
                    other => other.into(),
                })?,
                temperature: *softmax_temperature,
            },
        })
    }

    /// The config as it should be recorded, with the scorer's reported name.
    pub fn resolved_config(&self, config: &MatcherConfig) -> MatcherConfig {
        match (self, config) {
            (Matcher::Scorer { scorer, temperature }, _) => MatcherConfig::Scorer {
                name: scorer.name().to_string(),
                softmax_temperature: *temperature,
            },
            _ => config.clone(),
        }
    }

    fn attribute_sample(&self, sample: &Sample) -> Vec<(String, fairsumm_core::Result<AttributionResult>)> {
        let run = |f: &dyn Fn(&SummaryRecord) -> fairsumm_core::Result<AttributionResult>| {
            sample.summaries.iter().map(|s| (s.system.clone(), f(s))).collect()
        };
        match self {
            Matcher::Rule { k, split } => match SourceIndex::build(sample, *k) {
                Ok(index) => run(&|s| index.attribute(s, *split)),
                // repeat the build per summary so each failure carries the original error
                Err(_) => run(&|s| rule_match(sample, s, *k, *split)),
            },
            Matcher::Scorer { scorer, temperature } => run(&|s| scorer_match(sample, s, scorer.as_ref(), *temperature)),
            Matcher::File { store, temperature } => run(&|s| precomputed_match(sample, s, store, *temperature)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub sample_id: String,
    pub system: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    pub system: String,
    pub dataset: DatasetMetrics,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evaluation {
    /// Ordered by sample id, then system.
    pub samples: Vec<SampleMetrics>,
    pub failures: Vec<Failure>,
}

/// Evaluates every (sample, summary) pair on `workers` threads (0 = one per core).
/// Results do not depend on the worker count or on completion order.
pub fn evaluate_corpus(
    samples: &[Sample],
    config: &FairnessConfig,
    matcher: &Matcher,
    workers: usize,
) -> Result<Evaluation> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;

    let outcomes: Vec<Vec<(String, String, fairsumm_core::Result<SampleMetrics>)>> = pool.install(|| {
        samples
            .par_iter()
            .map(|sample| {
                matcher
                    .attribute_sample(sample)
                    .into_iter()
                    .map(|(system, attribution)| {
                        let metrics = attribution.and_then(|a| evaluate_sample(sample, &system, &a, config));
                        (sample.id.clone(), system, metrics)
                    })
                    .collect()
            })
            .collect()
    });

    let mut evaluation = Evaluation::default();
    for (sample_id, system, outcome) in outcomes.into_iter().flatten() {
        match outcome {
            Ok(m) => evaluation.samples.push(m),
            Err(e) => evaluation.failures.push(Failure {
                sample_id,
                system,
                reason: e.to_string(),
            }),
        }
    }
    evaluation
        .samples
        .sort_by(|a, b| (&a.sample_id, &a.system).cmp(&(&b.sample_id, &b.system)));
    evaluation
        .failures
        .sort_by(|a, b| (&a.sample_id, &a.system).cmp(&(&b.sample_id, &b.system)));
    Ok(evaluation)
}

/// Dataset metrics per system, ordered by system name. Systems with no
/// successfully evaluated sample are left out; their failures say why.
pub fn aggregate_by_system(samples: &[SampleMetrics], config: &FairnessConfig) -> Result<Vec<SystemMetrics>> {
    let mut groups: BTreeMap<&str, Vec<SampleMetrics>> = BTreeMap::new();
    for m in samples {
        groups.entry(m.system.as_str()).or_default().push(m.clone());
    }
    groups
        .into_iter()
        .map(|(system, ms)| {
            Ok(SystemMetrics {
                system: system.to_string(),
                dataset: aggregate(&ms, config)?,
            })
        })
        .collect()
}
