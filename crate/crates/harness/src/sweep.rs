use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use fairsumm_core::{Sample, SummaryRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{GenerationConfig, Generator, Usage};
use crate::error::{HarnessError, Result};
use crate::prompt::{male_percent, render_prompt, Addon, PromptTemplate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Temperature(Vec<f64>),
    Sentences(Vec<u32>),
    /// `true` appends the fair instruction with the sample's own male share.
    Instruction(Vec<bool>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Temperature(v) => v.len(),
            SweepAxis::Sentences(v) => v.len(),
            SweepAxis::Instruction(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SweepAxis::Temperature(ts) => {
                if let Some(t) = ts.iter().find(|t| !t.is_finite() || **t < 0.0) {
                    return Err(HarnessError::Config(format!("temperature must be >= 0, got {t}")));
                }
            }
            SweepAxis::Sentences(ns) => {
                if ns.contains(&0) {
                    return Err(HarnessError::Config("sentence count must be positive".into()));
                }
            }
            SweepAxis::Instruction(_) => {}
        }
        Ok(())
    }

    fn label(&self, i: usize) -> String {
        match self {
            SweepAxis::Temperature(v) => format!("temperature={}", v[i]),
            SweepAxis::Sentences(v) => format!("sentences={}", v[i]),
            SweepAxis::Instruction(v) => format!("instruction={}", if v[i] { "on" } else { "off" }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub system: String,
    pub prompt_hash: String,
    pub temperature: f64,
    pub text: String,
    pub excluded: bool,
    pub model: String,
    pub max_tokens: u32,
    pub axis: String,
    pub template: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub addons: Vec<Addon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

struct Job<'a> {
    sample: &'a Sample,
    axis_index: usize,
}

/// Runs one generation per (sample, axis point). Failures are recorded in the
/// manifest and do not stop the sweep. Output order is sample-major, then axis
/// order, regardless of which request finished first.
pub fn run_sweep(
    corpus: &[Sample],
    template: &PromptTemplate,
    axis: &SweepAxis,
    config: &GenerationConfig,
    generator: &dyn Generator,
) -> Result<Vec<ManifestRecord>> {
    template.validate()?;
    axis.validate()?;
    config.validate()?;

    let jobs: Vec<Job> = corpus
        .iter()
        .flat_map(|sample| (0..axis.len()).map(move |axis_index| Job { sample, axis_index }))
        .collect();
    let slots: Mutex<Vec<Option<ManifestRecord>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);

    thread::scope(|scope| {
        for _ in 0..config.concurrency.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let record = run_job(job, template, axis, config, generator);
                slots.lock().expect("manifest lock poisoned")[i] = Some(record);
            });
        }
    });

    Ok(slots
        .into_inner()
        .expect("manifest lock poisoned")
        .into_iter()
        .flatten()
        .collect())
}

fn run_job(
    job: &Job,
    template: &PromptTemplate,
    axis: &SweepAxis,
    config: &GenerationConfig,
    generator: &dyn Generator,
) -> ManifestRecord {
    let label = axis.label(job.axis_index);
    let mut template = template.clone();
    let mut temperature = config.temperature;
    let mut setup_error = None;
    match axis {
        SweepAxis::Temperature(ts) => temperature = ts[job.axis_index],
        SweepAxis::Sentences(ns) => template.addons.push(Addon::SentenceControl(ns[job.axis_index])),
        SweepAxis::Instruction(on) => {
            if on[job.axis_index] {
                match male_percent(job.sample) {
                    Ok(p) => template.addons.push(Addon::FairInstruction(p)),
                    Err(e) => setup_error = Some(e.to_string()),
                }
            }
        }
    }

    let mut record = ManifestRecord {
        sample_id: job.sample.id.clone(),
        system: format!("{}@{label}", config.model),
        prompt_hash: String::new(),
        temperature,
        text: String::new(),
        excluded: true,
        model: config.model.clone(),
        max_tokens: config.max_tokens,
        axis: label,
        template: template.id.to_string(),
        addons: template.addons.clone(),
        latency_ms: None,
        usage: None,
        error: setup_error,
    };
    if record.error.is_some() {
        return record;
    }
    let prompt = match render_prompt(&template, job.sample) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.prompt_hash = prompt_hash(&prompt);
    match generator.generate(&prompt, temperature) {
        Ok(generation) => {
            record.text = generation.summary.text;
            record.excluded = generation.excluded;
            record.latency_ms = Some(generation.latency_ms);
            record.usage = generation.usage;
        }
        Err(e) => {
            log::warn!("generation for {} ({}) failed: {e}", record.sample_id, record.axis);
            record.error = Some(e.to_string());
        }
    }
    record
}

/// Attaches every usable manifest output to its sample as a summary.
/// Excluded and failed records are skipped; a system already present is replaced.
pub fn apply_manifest(corpus: &[Sample], manifest: &[ManifestRecord]) -> Vec<Sample> {
    let mut out = corpus.to_vec();
    for record in manifest.iter().filter(|r| !r.excluded && !r.failed()) {
        let Some(sample) = out.iter_mut().find(|s| s.id == record.sample_id) else {
            log::warn!("manifest refers to unknown sample {}", record.sample_id);
            continue;
        };
        let summary = SummaryRecord::new(record.system.clone(), record.text.clone());
        match sample.summaries.iter_mut().find(|s| s.system == record.system) {
            Some(existing) => *existing = summary,
            None => sample.summaries.push(summary),
        }
    }
    out
}

pub fn write_manifest<W: Write>(mut writer: W, manifest: &[ManifestRecord]) -> Result<()> {
    for record in manifest {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &[ManifestRecord]) -> Result<()> {
    write_manifest(BufWriter::new(File::create(path)?), manifest)
}

pub fn read_manifest<R: Read>(reader: R) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| HarnessError::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    read_manifest(File::open(path)?)
}
