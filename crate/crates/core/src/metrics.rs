//! Fairness metrics over (target, gold) distribution pairs.
//!
//! A value v_k is underrepresented at tolerance τ when
//! `p_y(v_k) < τ · p_g(v_k)`. On top of that test:
//!
//! - BUR is 1 when any value is underrepresented.
//! - UER is `(1/r) Σ_k max(0, p_y(v_k) − p_g(v_k))`.
//! - AUC averages BUR over a midpoint grid of tolerances in [0, 1].
//! - SOF is the mean absolute deviation of the per-value gaps
//!   `max(0, p_g(v_k) − p_y(v_k))` around their mean.
//!
//! Dataset scores are plain means over samples, except SOF, which averages
//! the per-value gaps over the dataset first and then measures dispersion.

use serde::{Deserialize, Serialize};

use crate::attribution::{source_distribution, AttributionResult};
use crate::error::{Error, Result};
use crate::model::{
    normalize_distribution, FairnessConfig, GoldPolicy, Provenance, Sample, SofMode, ValueDistribution,
};

fn same_arity(a: &ValueDistribution, b: &ValueDistribution) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: a.len(),
        });
    }
    Ok(())
}

pub fn gold_distribution(policy: &GoldPolicy, source: &ValueDistribution) -> Result<ValueDistribution> {
    match policy {
        GoldPolicy::Ratio => Ok(source.clone().with_provenance(Provenance::Gold)),
        GoldPolicy::Equal => Ok(ValueDistribution::uniform(source.len(), Provenance::Gold)),
        GoldPolicy::Custom { weights } => {
            if weights.len() != source.len() {
                return Err(Error::Config(format!(
                    "custom gold has {} weights for {} values",
                    weights.len(),
                    source.len()
                )));
            }
            normalize_distribution(weights, Provenance::Gold)
                .map_err(|e| Error::Config(format!("custom gold weights: {e}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurOutcome {
    pub unfair: bool,
    /// Indices of underrepresented values, ascending.
    pub underrepresented: Vec<usize>,
}

impl BurOutcome {
    pub fn indicator(&self) -> u8 {
        u8::from(self.unfair)
    }
}

/// Binary unfairness at one tolerance. The comparison is strict, so ties are fair.
pub fn bur(target: &ValueDistribution, gold: &ValueDistribution, tolerance: f64) -> Result<BurOutcome> {
    same_arity(target, gold)?;
    let underrepresented: Vec<usize> = target
        .weights()
        .iter()
        .zip(gold.weights())
        .enumerate()
        .filter(|(_, (y, g))| **y < tolerance * **g)
        .map(|(k, _)| k)
        .collect();
    Ok(BurOutcome {
        unfair: !underrepresented.is_empty(),
        underrepresented,
    })
}

pub fn uer(target: &ValueDistribution, gold: &ValueDistribution) -> Result<f64> {
    same_arity(target, gold)?;
    let excess: f64 = target
        .weights()
        .iter()
        .zip(gold.weights())
        .map(|(y, g)| (y - g).max(0.0))
        .sum();
    Ok(excess / target.len() as f64)
}

/// Midpoints `(2j − 1) / (2n)` for `j = 1..=n`.
pub fn tolerance_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (2 * j - 1) as f64 / (2 * n) as f64).collect()
}

pub fn auc(target: &ValueDistribution, gold: &ValueDistribution, grid_size: usize) -> Result<f64> {
    if grid_size == 0 {
        return Err(Error::Config("AUC grid size must be at least 1".into()));
    }
    let mut unfair = 0usize;
    for tau in tolerance_grid(grid_size) {
        unfair += usize::from(bur(target, gold, tau)?.unfair);
    }
    Ok(unfair as f64 / grid_size as f64)
}

/// The exact integral of BUR over τ ∈ [0, 1].
///
/// BUR switches on once τ exceeds `min_k p_y(v_k) / p_g(v_k)` over values with
/// positive gold mass, so the integral is the length of what remains of [0, 1].
pub fn auc_exact(target: &ValueDistribution, gold: &ValueDistribution) -> Result<f64> {
    same_arity(target, gold)?;
    let breakpoint = target
        .weights()
        .iter()
        .zip(gold.weights())
        .filter(|(_, g)| **g > 0.0)
        .map(|(y, g)| y / g)
        .fold(f64::INFINITY, f64::min);
    Ok((1.0 - breakpoint).clamp(0.0, 1.0))
}

/// `max(0, p_g(v_k) − p_y(v_k))` per value.
pub fn underrepresentation_gaps(target: &ValueDistribution, gold: &ValueDistribution) -> Result<Vec<f64>> {
    same_arity(target, gold)?;
    Ok(gold
        .weights()
        .iter()
        .zip(target.weights())
        .map(|(g, y)| (g - y).max(0.0))
        .collect())
}

/// Second-order fairness over one or more per-value gap sets.
///
/// Gaps are averaged per value across the sets, then the mean absolute
/// deviation from their centre is returned. A single set gives the
/// sample-level score.
pub fn sof(sets: &[Vec<f64>]) -> Result<f64> {
    let first = sets.first().ok_or(Error::EmptyDataset)?;
    let r = first.len();
    if r == 0 {
        return Err(Error::Config("gap set has no values".into()));
    }
    let mut mean = vec![0.0; r];
    for set in sets {
        if set.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                found: set.len(),
            });
        }
        for (m, s) in mean.iter_mut().zip(set) {
            *m += s;
        }
    }
    let n = sets.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    let centre = mean.iter().sum::<f64>() / r as f64;
    Ok(mean.iter().map(|s| (s - centre).abs()).sum::<f64>() / r as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: String,
    pub system: String,
    pub matcher_id: String,
    pub values: Vec<String>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub gold: Vec<f64>,
    pub bur: u8,
    pub uer: f64,
    pub auc: f64,
    pub sof: f64,
    pub underrepresented_values: Vec<String>,
    /// `max(0, p_g − p_y)` per value.
    pub per_value_gap: Vec<f64>,
    /// The set fed to SOF under the configured mode.
    pub sof_set: Vec<f64>,
    pub hallucination_mass: f64,
}

pub fn evaluate_sample(
    sample: &Sample,
    system: &str,
    attribution: &AttributionResult,
    config: &FairnessConfig,
) -> Result<SampleMetrics> {
    let source = source_distribution(sample)?;
    let target = &attribution.target_distribution;
    same_arity(target, &source)?;
    let policy = sample.gold_override.as_ref().unwrap_or(&config.gold_policy);
    let gold = gold_distribution(policy, &source)?;

    let outcome = bur(target, &gold, config.tolerance)?;
    let per_value_gap = underrepresentation_gaps(target, &gold)?;
    let sof_set = match config.sof_mode {
        SofMode::Underrepresentation => per_value_gap.clone(),
        SofMode::Literal => underrepresentation_gaps(&source, &gold)?,
    };
    Ok(SampleMetrics {
        sample_id: sample.id.clone(),
        system: system.to_string(),
        matcher_id: attribution.matcher_id.clone(),
        values: sample.attribute.values.clone(),
        source: source.weights().to_vec(),
        target: target.weights().to_vec(),
        gold: gold.weights().to_vec(),
        bur: outcome.indicator(),
        uer: uer(target, &gold)?,
        auc: auc(target, &gold, config.auc_grid_size)?,
        sof: sof(std::slice::from_ref(&sof_set))?,
        underrepresented_values: outcome
            .underrepresented
            .iter()
            .map(|&k| sample.attribute.values[k].clone())
            .collect(),
        per_value_gap,
        sof_set,
        hallucination_mass: attribution.hallucination_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SofMethod {
    /// Per-value gaps averaged over the dataset, then dispersion.
    PerValueMean,
    /// Samples disagree on their value lists; mean of sample-level SOF.
    SampleMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueRate {
    pub value: String,
    /// Share of samples carrying this value where it was underrepresented, ×100.
    pub unfair_pct: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub bur_pct: f64,
    pub uer_pct: f64,
    pub auc_pct: f64,
    pub sof: f64,
    pub sof_method: SofMethod,
    pub n_samples: usize,
    pub per_value_unfair: Vec<ValueRate>,
    pub config: FairnessConfig,
}

pub fn aggregate(metrics: &[SampleMetrics], config: &FairnessConfig) -> Result<DatasetMetrics> {
    if metrics.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = metrics.len() as f64;
    let mean = |f: fn(&SampleMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;

    let homogeneous = metrics.iter().all(|m| m.values == metrics[0].values);
    let (sof_value, sof_method) = if homogeneous {
        let sets: Vec<Vec<f64>> = metrics.iter().map(|m| m.sof_set.clone()).collect();
        (sof(&sets)?, SofMethod::PerValueMean)
    } else {
        (mean(|m| m.sof), SofMethod::SampleMean)
    };

    // first-appearance order of values across samples
    let mut per_value: Vec<(String, usize, usize)> = Vec::new();
    for m in metrics {
        for v in &m.values {
            let pos = match per_value.iter().position(|(name, _, _)| name == v) {
                Some(p) => p,
                None => {
                    per_value.push((v.clone(), 0, 0));
                    per_value.len() - 1
                }
            };
            per_value[pos].2 += 1;
            if m.underrepresented_values.contains(v) {
                per_value[pos].1 += 1;
            }
        }
    }

    Ok(DatasetMetrics {
        bur_pct: mean(|m| f64::from(m.bur)) * 100.0,
        uer_pct: mean(|m| m.uer) * 100.0,
        auc_pct: mean(|m| m.auc) * 100.0,
        sof: sof_value,
        sof_method,
        n_samples: metrics.len(),
        per_value_unfair: per_value
            .into_iter()
            .map(|(value, unfair, total)| ValueRate {
                value,
                unfair_pct: unfair as f64 / total as f64 * 100.0,
                n_samples: total,
            })
            .collect(),
        config: config.clone(),
    })
}
