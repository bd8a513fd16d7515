use std::fmt;
use std::str::FromStr;

use fairsumm_core::attribution::source_distribution;
use fairsumm_core::Sample;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SOURCE_PLACEHOLDER: &str = "{SOURCE}";
pub const REVIEW_SEPARATOR: &str = " || ";
pub const TURN_SEPARATOR: &str = "\n";

const REVIEW_TAIL: &str =
    "Please write a short text containing the salient information, i.e. a summary. The summary of the reviews is:";
const DIALOGUE_TAIL: &str = "The summary of the dialogue is:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Claritin,
    Election,
    Amazon,
    Yelp,
    SupremeCourt,
    Iq2,
}

/// How source units are laid out inside the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceLayout {
    /// Unit texts joined by `" || "`.
    Reviews,
    /// One `"{value} : {text}"` line per turn.
    Dialogue,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::Claritin,
        TemplateId::Election,
        TemplateId::Amazon,
        TemplateId::Yelp,
        TemplateId::SupremeCourt,
        TemplateId::Iq2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Claritin => "claritin",
            TemplateId::Election => "election",
            TemplateId::Amazon => "amazon",
            TemplateId::Yelp => "yelp",
            TemplateId::SupremeCourt => "supremecourt",
            TemplateId::Iq2 => "iq2",
        }
    }

    pub fn layout(self) -> SourceLayout {
        match self {
            TemplateId::SupremeCourt | TemplateId::Iq2 => SourceLayout::Dialogue,
            _ => SourceLayout::Reviews,
        }
    }

    pub fn body(self) -> String {
        let review = |topic: &str| {
            format!("Reviews about {topic}. Each review is separated by || : {SOURCE_PLACEHOLDER} {REVIEW_TAIL}")
        };
        let dialogue = |topic: &str| {
            format!("{topic}. Each turn of the dialogue is one line: {SOURCE_PLACEHOLDER} {DIALOGUE_TAIL}")
        };
        match self {
            TemplateId::Claritin => review("Claritin"),
            TemplateId::Election => review("US Presidential Election"),
            TemplateId::Amazon => review("a product"),
            TemplateId::Yelp => review("a business"),
            TemplateId::SupremeCourt => dialogue("Dialogue of the Supreme Court oral arguments"),
            TemplateId::Iq2 => dialogue("Debates on certain topics"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| HarnessError::Template(format!("unknown template \"{s}\"")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Addon {
    SentenceControl(u32),
    /// Percentage of the source written by the first group, in `[0, 100]`.
    FairInstruction(f64),
}

impl Addon {
    pub fn render(&self) -> String {
        match self {
            Addon::SentenceControl(n) => format!("Summary it in {n} sentences."),
            Addon::FairInstruction(p) => {
                let (p, q) = (format_percent(*p), format_percent(100.0 - p));
                format!(
                    "{p}% of the reviews are written by males and {q}% written by females. They are mixed randomly in the source text. Please ensure the length of the male review in the summary is still {p}% of the total length."
                )
            }
        }
    }
}

/// Two decimals at most, trailing zeros dropped: 40 -> "40", 33.333 -> "33.33".
pub fn format_percent(p: f64) -> String {
    let s = format!("{:.2}", (p * 100.0).round() / 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub body: String,
    #[serde(default)]
    pub addons: Vec<Addon>,
}

impl PromptTemplate {
    pub fn new(id: TemplateId) -> Self {
        PromptTemplate {
            id,
            body: id.body(),
            addons: Vec::new(),
        }
    }

    pub fn with_addon(mut self, addon: Addon) -> Self {
        self.addons.push(addon);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.body.matches(SOURCE_PLACEHOLDER).count() {
            1 => {}
            0 => {
                return Err(HarnessError::Template(format!(
                    "template {} has no {SOURCE_PLACEHOLDER} placeholder",
                    self.id
                )))
            }
            n => {
                return Err(HarnessError::Template(format!(
                    "template {} has {n} {SOURCE_PLACEHOLDER} placeholders, expected one",
                    self.id
                )))
            }
        }
        for addon in &self.addons {
            if let Addon::FairInstruction(p) = addon {
                if !(0.0..=100.0).contains(p) {
                    return Err(HarnessError::Template(format!(
                        "fair-instruction percent {p} outside [0, 100]"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn join_source(layout: SourceLayout, sample: &Sample) -> String {
    match layout {
        SourceLayout::Reviews => sample
            .units
            .iter()
            .map(|u| u.text.as_str())
            .collect::<Vec<_>>()
            .join(REVIEW_SEPARATOR),
        SourceLayout::Dialogue => sample
            .units
            .iter()
            .map(|u| format!("{} : {}", u.value, u.text))
            .collect::<Vec<_>>()
            .join(TURN_SEPARATOR),
    }
}

pub fn render_prompt(template: &PromptTemplate, sample: &Sample) -> Result<String> {
    template.validate()?;
    let mut prompt = template
        .body
        .replacen(SOURCE_PLACEHOLDER, &join_source(template.id.layout(), sample), 1);
    for addon in &template.addons {
        prompt.push(' ');
        prompt.push_str(&addon.render());
    }
    Ok(prompt)
}

/// Source share of the `male` value (or the first value when absent), in percent.
pub fn male_percent(sample: &Sample) -> Result<f64> {
    let px = source_distribution(sample)?;
    let k = sample.attribute.index_of("male").unwrap_or(0);
    Ok(px.get(k) * 100.0)
}
