//! Reference-free fairness evaluation for summaries of grouped source text.
//!
//! A [`Sample`] pairs source units, each written by one value of a social
//! attribute (a gender, a party, a speaker), with one or more candidate
//! summaries. The crate attributes summary content back to those values,
//! compares the resulting target distribution against a gold distribution
//! and reports four fairness metrics:
//!
//! - **BUR**, binary unfair rate: is any value underrepresented at tolerance τ?
//! - **UER**, unfair error rate: the mean positive gap between target and gold.
//! - **AUC**: BUR integrated over τ ∈ [0, 1].
//! - **SOF**, second-order fairness: dispersion of the per-value gaps.
//!
//! The modules follow the evaluation pipeline: [`ingest`] builds samples,
//! [`attribution`] produces value distributions, [`metrics`] scores them and
//! [`synth`] generates controlled mixtures plus an independent oracle for
//! testing the rest.

pub mod attribution;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod synth;

pub use attribution::{tokenize, AttributionResult, TokenAssignment};
pub use error::{Error, Result};
pub use metrics::{DatasetMetrics, SampleMetrics};
pub use model::{
    normalize_distribution, AttributeSpec, FairnessConfig, GoldPolicy, MatcherConfig, Provenance, Sample, SourceUnit,
    SummaryRecord, ValueDistribution,
};
