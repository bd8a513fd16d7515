//! Domain types shared across the pipeline.
//!
//! Every distribution is a dense vector indexed by the position of a value in
//! its [`AttributeSpec`]; weights[k] always refers to `values[k]`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attribution::tokenize;
use crate::error::{Error, Result};

/// Maximum deviation of a distribution's total mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_TOLERANCE: f64 = 0.8;
pub const DEFAULT_K: usize = 1;
pub const DEFAULT_SOFTMAX_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_AUC_GRID: usize = 10;

/// A social attribute and its ordered values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub name: String,
    pub values: Vec<String>,
}

impl AttributeSpec {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            values,
        };
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec)
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Number of values, `r`.
    pub fn arity(&self) -> usize {
        self.values.len()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.values.len() < 2 {
            out.push(format!(
                "attribute {:?} needs at least 2 values, has {}",
                self.name,
                self.values.len()
            ));
        }
        let mut seen = HashSet::new();
        for v in &self.values {
            if !seen.insert(v.as_str()) {
                out.push(format!("duplicate value {v:?} in attribute {:?}", self.name));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceUnit {
    pub text: String,
    pub value: String,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryRecord {
    pub system: String,
    pub text: String,
}

impl SummaryRecord {
    pub fn new(system: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            system: system.into(),
            text: text.into(),
        }
    }
}

/// How the gold distribution is derived for a sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GoldPolicy {
    /// Gold follows the source distribution.
    #[default]
    Ratio,
    /// Gold is uniform over the values.
    Equal,
    /// User-supplied weights, normalized on use.
    Custom { weights: Vec<f64> },
}

impl fmt::Display for GoldPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoldPolicy::Ratio => f.write_str("ratio"),
            GoldPolicy::Equal => f.write_str("equal"),
            GoldPolicy::Custom { weights } => {
                let w: Vec<String> = weights.iter().map(|w| w.to_string()).collect();
                write!(f, "custom({})", w.join(","))
            }
        }
    }
}

/// One evaluation unit: labeled source units and the summaries to judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub attribute: AttributeSpec,
    pub units: Vec<SourceUnit>,
    pub summaries: Vec<SummaryRecord>,
    #[serde(rename = "gold", default, skip_serializing_if = "Option::is_none")]
    pub gold_override: Option<GoldPolicy>,
}

impl Sample {
    pub fn new(id: impl Into<String>, attribute: AttributeSpec, units: Vec<SourceUnit>) -> Self {
        Self {
            id: id.into(),
            attribute,
            units,
            summaries: Vec::new(),
            gold_override: None,
        }
    }

    pub fn with_summary(mut self, summary: SummaryRecord) -> Self {
        self.summaries.push(summary);
        self
    }

    pub fn summary(&self, system: &str) -> Option<&SummaryRecord> {
        self.summaries.iter().find(|s| s.system == system)
    }

    /// Source texts grouped by value, in unit order, joined by a single space.
    pub fn partition_by_value(&self) -> Vec<String> {
        let mut parts = vec![String::new(); self.attribute.arity()];
        for unit in &self.units {
            if let Some(k) = self.attribute.index_of(&unit.value) {
                if !parts[k].is_empty() {
                    parts[k].push(' ');
                }
                parts[k].push_str(&unit.text);
            }
        }
        parts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Source,
    Target,
    Gold,
}

/// A probability vector over the values of an attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueDistribution {
    weights: Vec<f64>,
    provenance: Provenance,
}

impl ValueDistribution {
    /// Accepts already-normalized weights.
    pub fn new(weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        check_weights(&weights)?;
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { weights, provenance })
    }

    pub fn uniform(arity: usize, provenance: Provenance) -> Self {
        let w = 1.0 / arity as f64;
        Self {
            weights: vec![w; arity],
            provenance,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    /// Reorders weights so that `out[i] = self[order[i]]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            provenance: self.provenance,
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidWeight { index, value });
        }
    }
    Ok(())
}

/// Scales non-negative raw masses to sum to one.
pub fn normalize_distribution(raw: &[f64], provenance: Provenance) -> Result<ValueDistribution> {
    check_weights(raw)?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroMass("all weights are zero".into()));
    }
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(ValueDistribution { weights, provenance })
}

/// How a k-gram matched by several values is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Each of the m matched values receives 1/m.
    #[default]
    Fractional,
    /// Each matched value receives a full count before normalization.
    Full,
}

/// Which per-value set feeds second-order fairness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SofMode {
    /// max(0, gold - target): underrepresentation of each value.
    #[default]
    Underrepresentation,
    /// max(0, gold - source), as literally written; zero under ratio gold.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MatcherConfig {
    Rule {
        k: usize,
        #[serde(default)]
        split: SplitMode,
    },
    Scorer {
        name: String,
        softmax_temperature: f64,
    },
    /// Scores read from a precomputed score file.
    File {
        path: String,
        softmax_temperature: f64,
    },
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig::Rule {
            k: DEFAULT_K,
            split: SplitMode::Fractional,
        }
    }
}

impl MatcherConfig {
    pub fn id(&self) -> String {
        match self {
            MatcherConfig::Rule { k, .. } => format!("rule-k{k}"),
            MatcherConfig::Scorer { name, .. } => format!("scorer-{name}"),
            MatcherConfig::File { .. } => "file".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessConfig {
    pub gold_policy: GoldPolicy,
    pub tolerance: f64,
    pub matcher: MatcherConfig,
    pub auc_grid_size: usize,
    #[serde(default)]
    pub sof_mode: SofMode,
}

impl Default for FairnessConfig {
    fn default() -> Self {
        Self {
            gold_policy: GoldPolicy::Ratio,
            tolerance: DEFAULT_TOLERANCE,
            matcher: MatcherConfig::default(),
            auc_grid_size: DEFAULT_AUC_GRID,
            sof_mode: SofMode::Underrepresentation,
        }
    }
}

impl FairnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tolerance) {
            return Err(Error::Config(format!("tolerance {} outside [0, 1]", self.tolerance)));
        }
        if self.auc_grid_size == 0 {
            return Err(Error::Config("AUC grid size must be at least 1".into()));
        }
        match &self.matcher {
            MatcherConfig::Rule { k, .. } if *k == 0 => {
                return Err(Error::Config("k-gram size must be at least 1".into()))
            }
            MatcherConfig::Scorer {
                softmax_temperature: t, ..
            }
            | MatcherConfig::File {
                softmax_temperature: t, ..
            } if !(t.is_finite() && *t >= crate::attribution::MIN_TEMPERATURE) => {
                return Err(Error::InvalidTemperature(*t))
            }
            _ => {}
        }
        if let GoldPolicy::Custom { weights } = &self.gold_policy {
            check_weights(weights)?;
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("custom gold weights sum to zero".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.of(Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.of(Severity::Warning)
    }

    fn of(&self, severity: Severity) -> impl Iterator<Item = &str> {
        self.issues
            .iter()
            .filter(move |i| i.severity == severity)
            .map(|i| i.message.as_str())
    }

    fn error(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Error,
            message,
        });
    }

    fn warn(&mut self, message: String) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message,
        });
    }
}

/// Checks one sample against the schema invariants.
pub fn validate_sample(sample: &Sample) -> ValidationReport {
    let mut report = ValidationReport::default();
    if sample.id.trim().is_empty() {
        report.error("empty sample id".into());
    }
    for p in sample.attribute.problems() {
        report.error(p);
    }
    if sample.units.is_empty() {
        report.error("empty unit list".into());
    }

    let mut mass = vec![0usize; sample.attribute.arity()];
    for (i, unit) in sample.units.iter().enumerate() {
        match sample.attribute.index_of(&unit.value) {
            Some(k) => mass[k] += 1,
            None => report.error(format!("unknown value {:?} in unit {i}", unit.value)),
        }
        if tokenize(&unit.text).is_empty() {
            report.error(format!("unit {i} has no text after normalization"));
        }
    }
    if !sample.units.is_empty() {
        for (k, count) in mass.iter().enumerate() {
            if *count == 0 {
                report.warn(format!("zero-mass value: {}", sample.attribute.values[k]));
            }
        }
    }

    let mut systems = HashSet::new();
    for (i, summary) in sample.summaries.iter().enumerate() {
        if summary.system.trim().is_empty() {
            report.error(format!("summary {i} has an empty system name"));
        } else if !systems.insert(summary.system.as_str()) {
            report.error(format!("duplicate summary system {:?}", summary.system));
        }
        if summary.text.trim().is_empty() {
            report.warn(format!("empty summary text from system {:?}", summary.system));
        }
    }

    if let Some(GoldPolicy::Custom { weights }) = &sample.gold_override {
        if weights.len() != sample.attribute.arity() {
            report.error(format!(
                "custom gold has {} weights for {} values",
                weights.len(),
                sample.attribute.arity()
            ));
        } else if check_weights(weights).is_err() || weights.iter().sum::<f64>() <= 0.0 {
            report.error("custom gold weights are not normalizable".into());
        }
    }
    report
}

/// Per-sample validation plus corpus-wide id uniqueness. Reports are in sample order.
pub fn validate_corpus(samples: &[Sample]) -> Vec<ValidationReport> {
    let mut seen = HashSet::new();
    samples
        .iter()
        .map(|s| {
            let mut report = validate_sample(s);
            if !seen.insert(s.id.as_str()) {
                report.error(format!("duplicate id {:?}", s.id));
            }
            report
        })
        .collect()
}
