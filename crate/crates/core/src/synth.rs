//! Controlled source mixtures, degenerate fixtures and an independent
//! re-implementation of k-gram attribution used as a test oracle.
//!
//! Mixtures sample a fixed number of units from per-value pools at a chosen
//! ratio. Feeding a metric a mixture that omits a value entirely ("biased")
//! next to one that keeps the pool's natural ratio ("balanced") should give
//! clearly separated scores; [`run_separation`] measures exactly that.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attribution::rule_match;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_sample, SampleMetrics};
use crate::model::{
    normalize_distribution, AttributeSpec, FairnessConfig, GoldPolicy, MatcherConfig, Provenance, Sample, SourceUnit,
    SplitMode, SummaryRecord, ValueDistribution,
};

/// Candidate unit texts per value, indexed like the attribute's values.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub attribute: AttributeSpec,
    pub texts: Vec<Vec<String>>,
}

impl Pool {
    pub fn from_units(attribute: AttributeSpec, units: &[SourceUnit]) -> Result<Self> {
        let mut texts = vec![Vec::new(); attribute.arity()];
        for unit in units {
            let k = attribute
                .index_of(&unit.value)
                .ok_or_else(|| Error::Config(format!("pool unit has unknown value {:?}", unit.value)))?;
            texts[k].push(unit.text.clone());
        }
        Ok(Self { attribute, texts })
    }

    /// Reads `{"text","value"}` lines. Without explicit `values` the attribute
    /// takes values in order of first appearance.
    pub fn load(path: impl AsRef<Path>, attribute_name: &str, values: Option<Vec<String>>) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut units = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let unit: SourceUnit = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            units.push(unit);
        }
        let values = values.unwrap_or_else(|| {
            let mut seen: Vec<String> = Vec::new();
            for u in &units {
                if !seen.contains(&u.value) {
                    seen.push(u.value.clone());
                }
            }
            seen
        });
        Self::from_units(AttributeSpec::new(attribute_name, values)?, &units)
    }

    /// Natural distribution of the pool by unit count.
    pub fn natural_ratio(&self) -> Result<ValueDistribution> {
        let counts: Vec<f64> = self.texts.iter().map(|t| t.len() as f64).collect();
        normalize_distribution(&counts, Provenance::Gold)
    }
}

/// Parameters for [`synthetic_pool`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub units_per_value: Vec<usize>,
    /// Probability that a token is drawn from the vocabulary shared by all values.
    pub shared_fraction: f64,
    pub vocabulary: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self {
            units_per_value: vec![100, 400],
            shared_fraction: 0.3,
            vocabulary: 200,
            min_tokens: 8,
            max_tokens: 30,
            seed: 0,
        }
    }
}

/// Pseudo-word units with controllable vocabulary overlap between values.
///
/// Value k draws private tokens `v{k}w{i}`; shared tokens are `sw{i}`.
pub fn synthetic_pool(attribute: AttributeSpec, spec: &PoolSpec) -> Result<Pool> {
    if spec.units_per_value.len() != attribute.arity() {
        return Err(Error::DimensionMismatch {
            expected: attribute.arity(),
            found: spec.units_per_value.len(),
        });
    }
    if !(0.0..=1.0).contains(&spec.shared_fraction) || spec.vocabulary == 0 {
        return Err(Error::Config(
            "shared fraction must be in [0, 1] and vocabulary non-empty".into(),
        ));
    }
    if spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens {
        return Err(Error::Config("need 1 <= min_tokens <= max_tokens".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let texts = spec
        .units_per_value
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (0..n)
                .map(|_| {
                    let len = rng.gen_range(spec.min_tokens..=spec.max_tokens);
                    (0..len)
                        .map(|_| {
                            let w = rng.gen_range(0..spec.vocabulary);
                            if rng.gen_bool(spec.shared_fraction) {
                                format!("sw{w}")
                            } else {
                                format!("v{k}w{w}")
                            }
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect()
        })
        .collect();
    Ok(Pool { attribute, texts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub ratio: ValueDistribution,
    pub n_units: usize,
    pub seed: u64,
}

/// Integer counts summing to `n` closest to `ratio · n`.
///
/// Floors first, then hands the leftover units to the largest remainders,
/// lower index first on ties.
pub fn largest_remainder(ratio: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = ratio.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratio.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Draws units without replacement at the requested ratio, then shuffles them.
pub fn generate_mixture(id: &str, spec: &MixtureSpec, pool: &Pool) -> Result<Sample> {
    if spec.n_units == 0 {
        return Err(Error::Config("a mixture needs at least one unit".into()));
    }
    if spec.ratio.len() != pool.attribute.arity() {
        return Err(Error::DimensionMismatch {
            expected: pool.attribute.arity(),
            found: spec.ratio.len(),
        });
    }
    let counts = largest_remainder(spec.ratio.weights(), spec.n_units);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut units = Vec::with_capacity(spec.n_units);
    for (k, &count) in counts.iter().enumerate() {
        let available = pool.texts[k].len();
        if count > available {
            return Err(Error::PoolExhausted {
                value: pool.attribute.values[k].clone(),
                needed: count,
                available,
            });
        }
        for text in pool.texts[k].choose_multiple(&mut rng, count) {
            units.push(SourceUnit::new(text.clone(), pool.attribute.values[k].clone()));
        }
    }
    units.shuffle(&mut rng);
    Ok(Sample::new(id, pool.attribute.clone(), units))
}

/// Per-value unit counts of a sample, in attribute order.
pub fn unit_counts(sample: &Sample) -> Vec<usize> {
    let mut counts = vec![0; sample.attribute.arity()];
    for u in &sample.units {
        if let Some(k) = sample.attribute.index_of(&u.value) {
            counts[k] += 1;
        }
    }
    counts
}

/// Extractive summary keeping the first half (rounded up) of every unit's words.
pub fn lead_summary(sample: &Sample, system: &str) -> SummaryRecord {
    let parts: Vec<String> = sample
        .units
        .iter()
        .map(|u| {
            let words: Vec<&str> = u.text.split_whitespace().collect();
            words[..words.len().div_ceil(2)].join(" ")
        })
        .collect();
    SummaryRecord::new(system, parts.join(" "))
}

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Target distribution by brute force: every summary k-gram is compared
/// against every k-gram position of every unit.
///
/// Shares no code with the indexed matcher in `attribution::rule`.
pub fn oracle_distribution(
    sample: &Sample,
    summary: &SummaryRecord,
    k: usize,
    split: SplitMode,
) -> Result<ValueDistribution> {
    if k == 0 {
        return Err(Error::Config("k-gram size must be at least 1".into()));
    }
    let target = oracle_tokens(&summary.text);
    if target.is_empty() {
        return Err(Error::EmptySummary {
            system: summary.system.clone(),
        });
    }
    let r = sample.attribute.values.len();
    let mut unit_tokens = Vec::new();
    for unit in &sample.units {
        let mut value = None;
        for (i, v) in sample.attribute.values.iter().enumerate() {
            if *v == unit.value {
                value = Some(i);
            }
        }
        let value = value.ok_or_else(|| Error::Config(format!("unknown value {:?}", unit.value)))?;
        unit_tokens.push((value, oracle_tokens(&unit.text)));
    }

    let mut counts = vec![0.0; r];
    let mut matched_any = false;
    let mut start = 0;
    while start + k <= target.len() {
        let mut hit = vec![false; r];
        for (value, tokens) in &unit_tokens {
            let mut pos = 0;
            while pos + k <= tokens.len() {
                let mut equal = true;
                for offset in 0..k {
                    if tokens[pos + offset] != target[start + offset] {
                        equal = false;
                        break;
                    }
                }
                if equal {
                    hit[*value] = true;
                }
                pos += 1;
            }
        }
        let m = hit.iter().filter(|h| **h).count();
        if m > 0 {
            matched_any = true;
            let share = match split {
                SplitMode::Fractional => 1.0 / m as f64,
                SplitMode::Full => 1.0,
            };
            for v in 0..r {
                if hit[v] {
                    counts[v] += share;
                }
            }
        }
        start += 1;
    }
    if !matched_any {
        return Err(Error::ZeroMass("no summary k-gram occurs in the source".into()));
    }
    let total: f64 = counts.iter().sum();
    let weights = counts.iter().map(|c| c / total).collect();
    ValueDistribution::new(weights, Provenance::Target)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegenerateKind {
    /// Summary is every source unit, concatenated.
    FairIdentity,
    /// Summary keeps only tokens that never occur in this value's units.
    MissingValue(String),
    /// Base summary text repeated twice.
    DuplicatedSummary,
}

/// Builds a (sample, summary) pair with a known fairness outcome.
///
/// The duplicated variant repeats the sample's first summary, or the
/// concatenated source when it has none.
pub fn degenerate_pair(kind: &DegenerateKind, base: &Sample) -> Result<(Sample, SummaryRecord)> {
    let concatenated = || base.units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
    let summary = match kind {
        DegenerateKind::FairIdentity => SummaryRecord::new("identity", concatenated()),
        DegenerateKind::MissingValue(value) => {
            if base.attribute.index_of(value).is_none() {
                return Err(Error::Config(format!("{value:?} is not a value of the sample")));
            }
            let excluded: std::collections::HashSet<String> = base
                .units
                .iter()
                .filter(|u| &u.value == value)
                .flat_map(|u| oracle_tokens(&u.text))
                .collect();
            let kept: Vec<String> = base
                .units
                .iter()
                .filter(|u| &u.value != value)
                .flat_map(|u| oracle_tokens(&u.text))
                .filter(|t| !excluded.contains(t))
                .collect();
            if kept.is_empty() {
                return Err(Error::ZeroMass(format!("every token is shared with {value:?}")));
            }
            SummaryRecord::new(format!("missing-{value}"), kept.join(" "))
        }
        DegenerateKind::DuplicatedSummary => {
            let text = base
                .summaries
                .first()
                .map(|s| s.text.clone())
                .unwrap_or_else(concatenated);
            SummaryRecord::new("duplicated", format!("{text} {text}"))
        }
    };
    Ok((base.clone(), summary))
}

/// A sample whose values use pairwise disjoint vocabularies.
pub fn disjoint_fixture(id: &str, arity: usize, units_per_value: usize, seed: u64) -> Result<Sample> {
    let values = (0..arity).map(|k| format!("g{k}")).collect();
    let attribute = AttributeSpec::new("group", values)?;
    let spec = PoolSpec {
        units_per_value: vec![units_per_value; arity],
        shared_fraction: 0.0,
        vocabulary: 50,
        min_tokens: 3,
        max_tokens: 12,
        seed,
    };
    let pool = synthetic_pool(attribute, &spec)?;
    let units = pool
        .texts
        .iter()
        .enumerate()
        .flat_map(|(k, texts)| texts.iter().map(move |t| (k, t)))
        .map(|(k, t)| SourceUnit::new(t.clone(), pool.attribute.values[k].clone()))
        .collect();
    Ok(Sample::new(id, pool.attribute, units))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub mean_uer: f64,
    pub mean_bur: f64,
    pub mean_auc: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub biased: ConditionStats,
    pub balanced: ConditionStats,
    pub gold: Vec<f64>,
    pub tolerance: f64,
}

fn condition_stats(metrics: &[SampleMetrics]) -> ConditionStats {
    let n = metrics.len() as f64;
    ConditionStats {
        mean_uer: metrics.iter().map(|m| m.uer).sum::<f64>() / n,
        mean_bur: metrics.iter().map(|m| f64::from(m.bur)).sum::<f64>() / n,
        mean_auc: metrics.iter().map(|m| m.auc).sum::<f64>() / n,
        n: metrics.len(),
    }
}

/// Biased versus balanced mixtures, scored against the pool's natural ratio.
///
/// For each seed, one mixture puts all `n_units` on `biased_value` and one
/// follows the natural ratio. Each gets a lead-extract summary attributed by
/// unigram matching against its own source; the gold is the natural ratio.
pub fn run_separation(
    pool: &Pool,
    biased_value: usize,
    n_units: usize,
    seeds: impl IntoIterator<Item = u64>,
    tolerance: f64,
) -> Result<SeparationReport> {
    let natural = pool.natural_ratio()?;
    let mut biased_ratio = vec![0.0; pool.attribute.arity()];
    *biased_ratio
        .get_mut(biased_value)
        .ok_or_else(|| Error::Config(format!("no value at index {biased_value}")))? = 1.0;
    let biased_ratio = ValueDistribution::new(biased_ratio, Provenance::Source)?;

    let config = FairnessConfig {
        gold_policy: GoldPolicy::Custom {
            weights: natural.weights().to_vec(),
        },
        tolerance,
        matcher: MatcherConfig::Rule {
            k: 1,
            split: SplitMode::Fractional,
        },
        ..Default::default()
    };
    let mut biased = Vec::new();
    let mut balanced = Vec::new();
    for seed in seeds {
        for (ratio, out, tag) in [
            (&biased_ratio, &mut biased, "biased"),
            (&natural, &mut balanced, "balanced"),
        ] {
            let spec = MixtureSpec {
                ratio: ratio.clone(),
                n_units,
                seed,
            };
            let sample = generate_mixture(&format!("{tag}-{seed}"), &spec, pool)?;
            let summary = lead_summary(&sample, "lead");
            let attribution = rule_match(&sample, &summary, 1, SplitMode::Fractional)?;
            out.push(evaluate_sample(&sample, "lead", &attribution, &config)?);
        }
    }
    if biased.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(SeparationReport {
        biased: condition_stats(&biased),
        balanced: condition_stats(&balanced),
        gold: natural.weights().to_vec(),
        tolerance,
    })
}
