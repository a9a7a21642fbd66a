use std::collections::BTreeMap;
use std::path::Path;

use super::{bundled, PromptError, PromptTemplate};

pub const DEFAULT_EXAMPLE_COUNT: usize = 4;

/// Unit identifiers; also the catalog file stems (`<unit_id>.prompt.json`).
pub mod units {
    use crate::model::{KnowledgeKind, RelationType};

    pub const NON_FQN: &str = "parser.non_fqn";
    pub const FQN_INFERENCE: &str = "parser.fqn_inference";
    pub const CHOICE: &str = "decider.choice";
    pub const DIRECT: &str = "variant.direct";
    pub const COT: &str = "variant.cot";

    pub fn mining(kind: KnowledgeKind) -> String {
        format!("mine.{}", kind.as_str())
    }

    pub fn yes_no(relation: RelationType) -> String {
        format!("decider.yes_no.{}", relation.slug())
    }

    pub fn statement(relation: RelationType) -> String {
        format!("decider.statement.{}", relation.slug())
    }

    /// Every unit the pipeline can reference (26).
    pub fn all() -> Vec<String> {
        let mut out = vec![NON_FQN.to_string(), FQN_INFERENCE.to_string()];
        out.extend(KnowledgeKind::ALL.into_iter().map(mining));
        out.extend(RelationType::ALL.into_iter().map(yes_no));
        out.extend(RelationType::ALL.into_iter().map(statement));
        out.extend([CHOICE, DIRECT, COT].map(String::from));
        out
    }
}

const FILE_SUFFIX: &str = ".prompt.json";

/// Immutable map from unit id to template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCatalog {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for PromptCatalog {
    fn default() -> Self {
        PromptCatalog::bundled()
    }
}

impl PromptCatalog {
    pub fn bundled() -> Self {
        let templates = bundled::templates()
            .into_iter()
            .map(|t| (t.unit_id.clone(), t))
            .collect();
        PromptCatalog { templates }
    }

    /// Bundled templates, overridden by any `<unit_id>.prompt.json` in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut catalog = PromptCatalog::bundled();
        let bad = |path: &Path, reason: String| PromptError::BadFile {
            path: path.display().to_string(),
            reason,
        };
        let entries = std::fs::read_dir(dir).map_err(|e| bad(dir, e.to_string()))?;
        let mut paths: Vec<_> = entries.flatten().map(|e| e.path()).collect();
        paths.sort();
        for path in paths {
            let Some(unit) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(FILE_SUFFIX))
                .map(str::to_string)
            else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| bad(&path, e.to_string()))?;
            let mut template: PromptTemplate =
                serde_json::from_str(&text).map_err(|e| bad(&path, e.to_string()))?;
            template.unit_id = unit.clone();
            template.validate()?;
            if !catalog.templates.contains_key(&unit) {
                log::warn!("{}: unit {unit} is not used by the pipeline", path.display());
            }
            catalog.templates.insert(unit, template);
        }
        Ok(catalog)
    }

    /// Writes every template as `<dir>/<unit_id>.prompt.json`.
    pub fn write_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (unit, t) in &self.templates {
            let json = serde_json::to_string_pretty(t).expect("template serializes");
            std::fs::write(dir.join(format!("{unit}{FILE_SUFFIX}")), json + "\n")?;
        }
        Ok(())
    }

    pub fn get(&self, unit: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(unit)
            .ok_or_else(|| PromptError::UnknownUnit(unit.to_string()))
    }

    pub fn unit_ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn with_example_limit(mut self, n: usize) -> Self {
        for t in self.templates.values_mut() {
            t.examples.truncate(n);
        }
        self
    }

    /// Fails on the first unit the pipeline needs but the catalog lacks.
    pub fn check_complete(&self) -> Result<(), PromptError> {
        units::all()
            .into_iter()
            .try_for_each(|u| self.get(&u).map(|_| ()))
    }
}
