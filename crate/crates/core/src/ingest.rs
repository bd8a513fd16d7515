//! Corpus I/O and converters from raw review and dialogue text.
//!
//! The corpus format is one JSON object per line:
//!
//! ```text
//! {"id": "...", "attribute": {"name": "...", "values": ["..."]},
//!  "units": [{"text": "...", "value": "..."}],
//!  "summaries": [{"system": "...", "text": "..."}],
//!  "gold": {"type": "ratio" | "equal" | "custom", "weights": [...]}}
//! ```
//!
//! `gold` is optional and `weights` only appears for `custom`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use crate::attribution::tokenize;
use crate::error::{Error, Result};
use crate::model::{validate_sample, AttributeSpec, Sample, SourceUnit};

pub const DEFAULT_SEPARATOR: &str = " || ";
pub const DEFAULT_SEGMENT_TOKENS: usize = 1800;

/// Whether unknown keys in a corpus line are rejected or dropped with a warning.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KeyPolicy {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub warnings: Vec<LineWarning>,
}

const TOP_KEYS: &[&str] = &["id", "attribute", "units", "summaries", "gold"];
const ATTRIBUTE_KEYS: &[&str] = &["name", "values"];
const UNIT_KEYS: &[&str] = &["text", "value"];
const SUMMARY_KEYS: &[&str] = &["system", "text"];
const GOLD_KEYS: &[&str] = &["type", "weights"];

fn strip_object(value: &mut Value, allowed: &[&str], path: &str, removed: &mut Vec<String>) {
    if let Value::Object(map) = value {
        map.retain(|k, _| {
            let keep = allowed.contains(&k.as_str());
            if !keep {
                removed.push(format!("{path}{k}"));
            }
            keep
        });
    }
}

/// Removes keys outside the schema, returning their dotted paths.
fn strip_unknown_keys(value: &mut Value) -> Vec<String> {
    let mut removed = Vec::new();
    strip_object(value, TOP_KEYS, "", &mut removed);
    if let Some(attr) = value.get_mut("attribute") {
        strip_object(attr, ATTRIBUTE_KEYS, "attribute.", &mut removed);
    }
    if let Some(gold) = value.get_mut("gold") {
        strip_object(gold, GOLD_KEYS, "gold.", &mut removed);
    }
    for (field, keys) in [("units", UNIT_KEYS), ("summaries", SUMMARY_KEYS)] {
        if let Some(Value::Array(items)) = value.get_mut(field) {
            for (i, item) in items.iter_mut().enumerate() {
                strip_object(item, keys, &format!("{field}[{i}]."), &mut removed);
            }
        }
    }
    removed
}

/// Parses one corpus line. Warnings cover dropped keys in lenient mode.
pub fn parse_line(line: &str, lineno: usize, keys: KeyPolicy) -> Result<(Sample, Vec<String>)> {
    let parse_err = |e: serde_json::Error| Error::Parse {
        line: lineno,
        message: e.to_string(),
    };
    match keys {
        KeyPolicy::Strict => Ok((serde_json::from_str(line).map_err(parse_err)?, Vec::new())),
        KeyPolicy::Lenient => {
            let mut value: Value = serde_json::from_str(line).map_err(parse_err)?;
            let removed = strip_unknown_keys(&mut value);
            let sample = serde_json::from_value(value).map_err(parse_err)?;
            let warnings = removed
                .into_iter()
                .map(|k| format!("unknown key {k:?} ignored"))
                .collect();
            Ok((sample, warnings))
        }
    }
}

/// Reads and validates a corpus. Blank lines are skipped.
pub fn read_corpus(reader: impl BufRead, keys: KeyPolicy) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (sample, key_warnings) = parse_line(&line, lineno, keys)?;
        if !ids.insert(sample.id.clone()) {
            return Err(Error::Schema {
                line: lineno,
                message: format!("duplicate id {:?}", sample.id),
            });
        }
        let report = validate_sample(&sample);
        if report.has_errors() {
            return Err(Error::Validation {
                sample_id: sample.id.clone(),
                line: Some(lineno),
                issues: report.errors().map(str::to_string).collect(),
            });
        }
        corpus.warnings.extend(
            key_warnings
                .into_iter()
                .chain(report.warnings().map(str::to_string))
                .map(|message| LineWarning { line: lineno, message }),
        );
        corpus.samples.push(sample);
    }
    Ok(corpus)
}

pub fn load_corpus(path: impl AsRef<Path>, keys: KeyPolicy) -> Result<Corpus> {
    read_corpus(BufReader::new(File::open(path)?), keys)
}

pub fn serialize_sample(sample: &Sample) -> Result<String> {
    Ok(serde_json::to_string(sample)?)
}

pub fn write_corpus<'a>(samples: impl IntoIterator<Item = &'a Sample>, mut out: impl Write) -> Result<()> {
    for sample in samples {
        out.write_all(serialize_sample(sample)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_corpus<'a>(samples: impl IntoIterator<Item = &'a Sample>, path: impl AsRef<Path>) -> Result<()> {
    write_corpus(samples, std::io::BufWriter::new(File::create(path)?))
}

/// Splits delimiter-joined reviews into one unit per segment.
///
/// The separator is matched without its flanking whitespace and each segment
/// is trimmed, so `"a ||b"` splits the same way as `"a || b"`.
pub fn convert_review_corpus(
    id: &str,
    attribute: &AttributeSpec,
    raw: &str,
    labels: &[String],
    separator: &str,
) -> Result<Sample> {
    let sep = if separator.trim().is_empty() {
        separator
    } else {
        separator.trim()
    };
    if sep.is_empty() {
        return Err(Error::Config("empty review separator".into()));
    }
    let segments: Vec<&str> = raw.split(sep).map(str::trim).collect();
    if segments.len() != labels.len() {
        return Err(Error::Alignment {
            segments: segments.len(),
            labels: labels.len(),
        });
    }
    let units = segments
        .into_iter()
        .zip(labels)
        .map(|(text, label)| {
            if attribute.index_of(label).is_none() {
                return Err(Error::Config(format!(
                    "label {label:?} is not a value of attribute {:?}",
                    attribute.name
                )));
            }
            Ok(SourceUnit::new(text, label.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Sample::new(id, attribute.clone(), units))
}

fn speaker_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\S(?:[^:]{0,78}\S)?) :(?:\s+(.*))?$").expect("valid regex"))
}

/// Max words in a speaker name; longer prefixes are treated as turn text.
const MAX_SPEAKER_WORDS: usize = 8;

fn split_speaker(line: &str) -> Option<(&str, &str)> {
    let caps = speaker_line().captures(line)?;
    let name = caps.get(1)?.as_str();
    if name.split_whitespace().count() > MAX_SPEAKER_WORDS {
        return None;
    }
    Some((name, caps.get(2).map_or("", |m| m.as_str())))
}

/// Parses a transcript of `NAME : text` turns, one per line.
///
/// Lines without a speaker prefix continue the previous turn. The attribute
/// is `speaker`, with values in order of first appearance.
pub fn convert_dialogue(id: &str, raw: &str) -> Result<Sample> {
    let mut values: Vec<String> = Vec::new();
    let mut units: Vec<SourceUnit> = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match split_speaker(line) {
            Some((name, text)) => {
                if !values.iter().any(|v| v == name) {
                    values.push(name.to_string());
                }
                units.push(SourceUnit::new(text.trim(), name));
            }
            None => match units.last_mut() {
                Some(turn) => {
                    if !turn.text.is_empty() {
                        turn.text.push('\n');
                    }
                    turn.text.push_str(line);
                }
                None => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: "text before the first speaker turn".into(),
                    })
                }
            },
        }
    }
    // A single-speaker transcript converts but will fail validation (r < 2).
    let attribute = AttributeSpec {
        name: "speaker".into(),
        values,
    };
    Ok(Sample::new(id, attribute, units))
}

#[derive(Debug, Clone, Default)]
pub struct Segments {
    pub samples: Vec<Sample>,
    pub warnings: Vec<String>,
}

/// Greedily packs consecutive units into samples of at most `max_tokens` tokens.
///
/// A unit longer than the budget becomes its own segment. When more than one
/// segment results, ids get a `-seg{i}` suffix.
pub fn truncate_segments(sample: &Sample, max_tokens: usize) -> Result<Segments> {
    if max_tokens == 0 {
        return Err(Error::Config("segment budget must be at least 1 token".into()));
    }
    let mut groups: Vec<Vec<SourceUnit>> = Vec::new();
    let mut current: Vec<SourceUnit> = Vec::new();
    let mut used = 0usize;
    let mut warnings = Vec::new();
    for (i, unit) in sample.units.iter().enumerate() {
        let n = tokenize(&unit.text).len();
        if n > max_tokens {
            warnings.push(format!("unit {i} has {n} tokens, over the {max_tokens}-token budget"));
        }
        if !current.is_empty() && used + n > max_tokens {
            groups.push(std::mem::take(&mut current));
            used = 0;
        }
        current.push(unit.clone());
        used += n;
    }
    if !current.is_empty() {
        groups.push(current);
    }

    let single = groups.len() == 1;
    let samples = groups
        .into_iter()
        .enumerate()
        .map(|(i, units)| Sample {
            id: if single {
                sample.id.clone()
            } else {
                format!("{}-seg{i}", sample.id)
            },
            units,
            ..sample.clone()
        })
        .collect();
    Ok(Segments { samples, warnings })
}
