//! Prompt templates, the unit catalog, and parsers for raw model answers.

mod answers;
mod bundled;
mod catalog;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answers::{parse_choice_answer, parse_list_answer, parse_statement_answer, parse_yes_no, ChoiceAnswer};
pub use catalog::{units, PromptCatalog, DEFAULT_EXAMPLE_COUNT};

pub use crate::gateway::BLOCK_SEPARATOR;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template {unit}: missing bindings for {}", .missing.join(", "))]
    MissingSlot { unit: String, missing: Vec<String> },
    #[error("template {unit}: slot {slot} is used but not declared")]
    UndeclaredSlot { unit: String, slot: String },
    #[error("prompt catalog has no template for unit {0}")]
    UnknownUnit(String),
    #[error("prompt file {path}: {reason}")]
    BadFile { path: String, reason: String },
}

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z0-9_]+)\s*\}\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    #[serde(rename = "input")]
    pub input_text: String,
    #[serde(rename = "output")]
    pub output_text: String,
}

impl FewShotExample {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        FewShotExample {
            input_text: input.into(),
            output_text: output.into(),
        }
    }
}

/// Task description, few-shot examples and an input section with `{{SLOT}}`
/// placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    #[serde(default, skip_serializing)]
    pub unit_id: String,
    pub task_description: String,
    #[serde(default)]
    pub examples: Vec<FewShotExample>,
    pub input: String,
    pub slots: Vec<String>,
}

impl PromptTemplate {
    pub fn new(
        unit_id: impl Into<String>,
        task_description: impl Into<String>,
        examples: Vec<FewShotExample>,
        input: impl Into<String>,
        slots: &[&str],
    ) -> Result<Self, PromptError> {
        let t = PromptTemplate {
            unit_id: unit_id.into(),
            task_description: task_description.into(),
            examples,
            input: input.into(),
            slots: slots.iter().map(|s| s.to_string()).collect(),
        };
        t.validate()?;
        Ok(t)
    }

    /// Every placeholder must name a declared slot, and every example must
    /// have both sides.
    pub fn validate(&self) -> Result<(), PromptError> {
        let declared: BTreeSet<&str> = self.slots.iter().map(String::as_str).collect();
        let texts = std::iter::once(self.task_description.as_str())
            .chain(std::iter::once(self.input.as_str()))
            .chain(self.examples.iter().flat_map(|e| [e.input_text.as_str(), e.output_text.as_str()]));
        for text in texts {
            for cap in SLOT.captures_iter(text) {
                if !declared.contains(&cap[1]) {
                    return Err(PromptError::UndeclaredSlot {
                        unit: self.unit_id.clone(),
                        slot: cap[1].to_string(),
                    });
                }
            }
        }
        if let Some(i) = self
            .examples
            .iter()
            .position(|e| e.input_text.trim().is_empty() || e.output_text.trim().is_empty())
        {
            return Err(PromptError::BadFile {
                path: self.unit_id.clone(),
                reason: format!("example {i} has an empty side"),
            });
        }
        Ok(())
    }

    pub fn with_example_limit(mut self, n: usize) -> Self {
        self.examples.truncate(n);
        self
    }
}

fn substitute(text: &str, bindings: &BTreeMap<&str, &str>) -> String {
    SLOT.replace_all(text, |cap: &regex::Captures| {
        bindings.get(&cap[1]).copied().unwrap_or_default().to_string()
    })
    .into_owned()
}

/// Renders description, examples (in catalog order) and the bound input
/// section, separated by [`BLOCK_SEPARATOR`].
pub fn render(template: &PromptTemplate, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    let map: BTreeMap<&str, &str> = bindings.iter().copied().collect();
    let missing: Vec<String> = template
        .slots
        .iter()
        .filter(|s| !map.contains_key(s.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(PromptError::MissingSlot {
            unit: template.unit_id.clone(),
            missing,
        });
    }
    let mut blocks = Vec::with_capacity(template.examples.len() + 2);
    blocks.push(substitute(template.task_description.trim_end(), &map));
    for ex in &template.examples {
        blocks.push(format!(
            "{}\n{}",
            substitute(ex.input_text.trim_end(), &map),
            substitute(ex.output_text.trim(), &map)
        ));
    }
    blocks.push(substitute(template.input.trim_end(), &map));
    Ok(blocks.join(BLOCK_SEPARATOR))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mining_like(examples: usize) -> PromptTemplate {
        let ex = (0..examples)
            .map(|i| FewShotExample::new(format!("Question: q{i}?\nAnswer:"), format!("a{i}")))
            .collect();
        PromptTemplate::new(
            "t",
            "Answer the question.",
            ex,
            "Question: What is the primary usage of {{API}}?\nAnswer:",
            &["API"],
        )
        .unwrap()
    }

    #[test]
    fn render_binds_slot() {
        let out = render(&mining_like(4), &[("API", "java.io.File")]).unwrap();
        assert!(out.contains("What is the primary usage of java.io.File?"));
        assert!(!out.contains("{{"));
        assert_eq!(out.matches(BLOCK_SEPARATOR).count(), 5);
    }

    #[test]
    fn missing_slot_reported() {
        let t = PromptTemplate::new("pair", "d", vec![], "{{API1}} vs {{API2}}", &["API1", "API2"]).unwrap();
        assert_eq!(
            render(&t, &[("API1", "a.B")]),
            Err(PromptError::MissingSlot { unit: "pair".into(), missing: vec!["API2".into()] })
        );
    }

    #[test]
    fn zero_examples_is_description_plus_input() {
        let out = render(&mining_like(0), &[("API", "a.B")]).unwrap();
        assert_eq!(
            out,
            format!("Answer the question.{BLOCK_SEPARATOR}Question: What is the primary usage of a.B?\nAnswer:")
        );
    }

    #[test]
    fn undeclared_slot_rejected() {
        let err = PromptTemplate::new("t", "about {{OTHER}}", vec![], "{{API}}", &["API"]).unwrap_err();
        assert!(matches!(err, PromptError::UndeclaredSlot { .. }));
    }

    #[test]
    fn render_is_deterministic() {
        let t = mining_like(4);
        let a = render(&t, &[("API", "x.Y")]).unwrap();
        let b = render(&t.clone(), &[("API", "x.Y")]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_values_are_not_reexpanded() {
        let out = render(&mining_like(0), &[("API", "{{API}}")]).unwrap();
        assert!(out.ends_with("What is the primary usage of {{API}}?\nAnswer:"));
    }
}
