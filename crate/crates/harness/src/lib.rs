//! Prompt rendering and summary generation against chat-completions endpoints.
//!
//! Templates mirror the dataset-specific prompts; sweeps vary temperature,
//! sentence count or the fairness instruction and record every generation in a
//! line-delimited manifest that can be replayed into a corpus.

pub mod client;
pub mod error;
pub mod prompt;
pub mod sweep;

pub use client::{request_summary, Generation, GenerationConfig, Generator, HttpGenerator, Usage};
pub use error::{HarnessError, Result};
pub use prompt::{render_prompt, Addon, PromptTemplate, TemplateId};
pub use sweep::{apply_manifest, run_sweep, ManifestRecord, SweepAxis};
