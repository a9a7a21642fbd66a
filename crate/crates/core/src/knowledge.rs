//! Per-API knowledge mining and combination into per-pair knowledge blocks.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

use crate::gateway::{Complete, GatewayError};
use crate::model::{ApiPair, Fqn, KnowledgeBlock, KnowledgeFragment, KnowledgeKind, ModelError};
use crate::prompting::{render, units, PromptCatalog, PromptError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("empty {kind} knowledge for {api}")]
    EmptyKnowledge { api: String, kind: KnowledgeKind },
}

/// The question asked about one API for a knowledge kind, with an `{{API}}` slot.
pub fn mining_question(kind: KnowledgeKind) -> &'static str {
    match kind {
        KnowledgeKind::Usage => "What is the primary usage of {{API}}?",
        KnowledgeKind::Characteristics => "What are the characteristics of {{API}}?",
        KnowledgeKind::Performance => "What is the performance of {{API}}?",
        KnowledgeKind::Condition => "What should be done before and after using {{API}}?",
        KnowledgeKind::UsageScenario => "When should I use/ not use {{API}}?",
        KnowledgeKind::TaskScenario => "What tasks can {{API}} accomplish?",
        KnowledgeKind::TypeInfo => "What data types can {{API}} be converted to?",
    }
}

pub(crate) fn knowledge_label(kind: KnowledgeKind) -> &'static str {
    match kind {
        KnowledgeKind::Usage => "usage",
        KnowledgeKind::Characteristics => "characteristics",
        KnowledgeKind::Performance => "performance",
        KnowledgeKind::Condition => "usage conditions",
        KnowledgeKind::UsageScenario => "usage scenarios",
        KnowledgeKind::TaskScenario => "application tasks",
        KnowledgeKind::TypeInfo => "convertible data types",
    }
}

/// Asks one knowledge question about one API. Only `api` is bound into the
/// prompt.
pub fn mine(
    api: &Fqn,
    kind: KnowledgeKind,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Result<KnowledgeFragment, KnowledgeError> {
    let template = catalog.get(&units::mining(kind))?;
    let name = api.normalized();
    let prompt = render(template, &[("API", name.as_str())])?;
    let result = gateway.ask(&prompt)?;
    let text = result.text.trim();
    if text.is_empty() {
        return Err(KnowledgeError::EmptyKnowledge { api: name, kind });
    }
    Ok(KnowledgeFragment::new(api.clone(), kind, text, result.digest)?)
}

/// Builds a block, rejecting fragments about APIs outside the pair.
pub fn combine(pair: &ApiPair, fragments: impl IntoIterator<Item = KnowledgeFragment>) -> Result<KnowledgeBlock, ModelError> {
    let mut block = KnowledgeBlock::new(pair.clone());
    for f in fragments {
        block.insert(f)?;
    }
    Ok(block)
}

/// Text layout of a block: for each kind in `kinds` (in canonical order),
/// the first API's fragment then the second's, each prefixed
/// `Knowledge of <FQN>:`. Absent fragments are written out as unavailable
/// when `note_missing` is set and skipped otherwise.
pub fn format_block(block: &KnowledgeBlock, kinds: &[KnowledgeKind], note_missing: bool) -> String {
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let pair = block.pair();
    let mut lines = Vec::new();
    for kind in kinds {
        for api in [pair.first(), pair.second()] {
            match block.get(api, kind) {
                Some(f) => lines.push(format!("Knowledge of {api}: {}", f.text.trim())),
                None if note_missing => lines.push(format!(
                    "Knowledge of {api}: no knowledge available about its {}.",
                    knowledge_label(kind)
                )),
                None => {}
            }
        }
    }
    lines.join("\n")
}

type Slot = Arc<OnceLock<Result<KnowledgeFragment, KnowledgeError>>>;

/// Mines each (api, kind) at most once, however many pairs or threads ask.
#[derive(Default)]
pub struct FragmentCache {
    slots: Mutex<HashMap<(Fqn, KnowledgeKind), Slot>>,
}

impl FragmentCache {
    pub fn new() -> Self {
        FragmentCache::default()
    }

    pub fn get_or_mine(
        &self,
        api: &Fqn,
        kind: KnowledgeKind,
        catalog: &PromptCatalog,
        gateway: &dyn Complete,
    ) -> Result<KnowledgeFragment, KnowledgeError> {
        let slot = self
            .slots
            .lock()
            .unwrap()
            .entry((api.clone(), kind))
            .or_default()
            .clone();
        slot.get_or_init(|| mine(api, kind, catalog, gateway)).clone()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
