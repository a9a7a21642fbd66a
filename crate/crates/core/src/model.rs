//! Shared vocabulary: relation types, knowledge kinds, API names, pairs, votes.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("not a fully qualified name: {raw:?} ({reason})")]
    NotAFqn { raw: String, reason: String },
    #[error("cannot pair an API with itself: {0}")]
    SelfPair(String),
    #[error("fragment for {api} does not belong to pair {pair}")]
    ForeignFragment { api: String, pair: String },
    #[error("knowledge fragment for {0} is empty")]
    EmptyFragment(String),
    #[error("unknown relation type {0:?}")]
    UnknownRelation(String),
}

/// The seven relation types, in definition-table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationType {
    FunctionSimilarity,
    BehaviorDifference,
    FunctionReplace,
    FunctionCollaboration,
    LogicConstraint,
    EfficiencyComparison,
    TypeConversion,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::FunctionSimilarity,
        RelationType::BehaviorDifference,
        RelationType::FunctionReplace,
        RelationType::FunctionCollaboration,
        RelationType::LogicConstraint,
        RelationType::EfficiencyComparison,
        RelationType::TypeConversion,
    ];

    pub fn definition(self) -> &'static str {
        match self {
            RelationType::FunctionSimilarity => "Two API entities have similar usage.",
            RelationType::BehaviorDifference => {
                "Two API entities behave differently when completing the same task."
            }
            RelationType::FunctionReplace => {
                "One API entity should be replaced by another API in some specific condition."
            }
            RelationType::FunctionCollaboration => {
                "Two API entities should be used together when accomplishing a task."
            }
            RelationType::LogicConstraint => {
                "One API should be called before or after using another API."
            }
            RelationType::EfficiencyComparison => {
                "Two APIs have an efficiency comparison in a certain condition."
            }
            RelationType::TypeConversion => "Two API entities can be converted to each other.",
        }
    }

    /// Kebab-case identifier used in files and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            RelationType::FunctionSimilarity => "function-similarity",
            RelationType::BehaviorDifference => "behavior-difference",
            RelationType::FunctionReplace => "function-replace",
            RelationType::FunctionCollaboration => "function-collaboration",
            RelationType::LogicConstraint => "logic-constraint",
            RelationType::EfficiencyComparison => "efficiency-comparison",
            RelationType::TypeConversion => "type-conversion",
        }
    }

    /// Lowercase words, as a model would write them ("function similarity").
    pub fn display_name(self) -> &'static str {
        match self {
            RelationType::FunctionSimilarity => "function similarity",
            RelationType::BehaviorDifference => "behavior difference",
            RelationType::FunctionReplace => "function replace",
            RelationType::FunctionCollaboration => "function collaboration",
            RelationType::LogicConstraint => "logic constraint",
            RelationType::EfficiencyComparison => "efficiency comparison",
            RelationType::TypeConversion => "type conversion",
        }
    }

    pub fn knowledge_kind(self) -> KnowledgeKind {
        match self {
            RelationType::FunctionSimilarity => KnowledgeKind::Usage,
            RelationType::BehaviorDifference => KnowledgeKind::Characteristics,
            RelationType::FunctionReplace => KnowledgeKind::UsageScenario,
            RelationType::FunctionCollaboration => KnowledgeKind::TaskScenario,
            RelationType::LogicConstraint => KnowledgeKind::Condition,
            RelationType::EfficiencyComparison => KnowledgeKind::Performance,
            RelationType::TypeConversion => KnowledgeKind::TypeInfo,
        }
    }
}

/// Lowercases and folds `-`, `_` and runs of whitespace into single spaces.
pub(crate) fn fold_relation_text(s: &str) -> String {
    s.to_lowercase()
        .replace(['-', '_'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

impl FromStr for RelationType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = fold_relation_text(s);
        RelationType::ALL
            .into_iter()
            .find(|r| r.display_name() == folded)
            .ok_or_else(|| ModelError::UnknownRelation(s.to_string()))
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.slug())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The kind of knowledge mined about a single API; one per relation type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeKind {
    Usage,
    Characteristics,
    Performance,
    Condition,
    UsageScenario,
    TaskScenario,
    TypeInfo,
}

impl KnowledgeKind {
    pub const ALL: [KnowledgeKind; 7] = [
        KnowledgeKind::Usage,
        KnowledgeKind::Characteristics,
        KnowledgeKind::Performance,
        KnowledgeKind::Condition,
        KnowledgeKind::UsageScenario,
        KnowledgeKind::TaskScenario,
        KnowledgeKind::TypeInfo,
    ];

    pub fn relation(self) -> RelationType {
        match self {
            KnowledgeKind::Usage => RelationType::FunctionSimilarity,
            KnowledgeKind::Characteristics => RelationType::BehaviorDifference,
            KnowledgeKind::Performance => RelationType::EfficiencyComparison,
            KnowledgeKind::Condition => RelationType::LogicConstraint,
            KnowledgeKind::UsageScenario => RelationType::FunctionReplace,
            KnowledgeKind::TaskScenario => RelationType::FunctionCollaboration,
            KnowledgeKind::TypeInfo => RelationType::TypeConversion,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeKind::Usage => "usage",
            KnowledgeKind::Characteristics => "characteristics",
            KnowledgeKind::Performance => "performance",
            KnowledgeKind::Condition => "condition",
            KnowledgeKind::UsageScenario => "usage_scenario",
            KnowledgeKind::TaskScenario => "task_scenario",
            KnowledgeKind::TypeInfo => "type_info",
        }
    }
}

impl fmt::Display for KnowledgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A dotted fully qualified API name such as `java.lang.StringBuffer`.
///
/// Equality, ordering and hashing use the dotted form only; the call suffix
/// and the raw source string are metadata.
#[derive(Debug, Clone)]
pub struct Fqn {
    dotted: Arc<str>,
    raw: Arc<str>,
    call_suffix: bool,
}

impl Fqn {
    pub fn segments(&self) -> Vec<&str> {
        self.dotted.split('.').collect()
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn has_call_suffix(&self) -> bool {
        self.call_suffix
    }

    /// Segments joined with `.`, without call suffix.
    pub fn normalized(&self) -> String {
        self.dotted.to_string()
    }

    pub fn as_str(&self) -> &str {
        &self.dotted
    }

    /// Normalized form with `()` appended when the source had a call suffix.
    pub fn source_form(&self) -> String {
        if self.call_suffix {
            format!("{}()", self.dotted)
        } else {
            self.normalized()
        }
    }

    pub fn simple_name(&self) -> &str {
        self.dotted.rsplit('.').next().unwrap_or_default()
    }
}

impl PartialEq for Fqn {
    fn eq(&self, other: &Self) -> bool {
        self.dotted == other.dotted
    }
}

impl Eq for Fqn {}

impl Hash for Fqn {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.dotted.hash(state);
    }
}

impl Ord for Fqn {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dotted.cmp(&other.dotted)
    }
}

impl PartialOrd for Fqn {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fqn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dotted)
    }
}

impl FromStr for Fqn {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_fqn(s)
    }
}

impl Serialize for Fqn {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.dotted)
    }
}

impl<'de> Deserialize<'de> for Fqn {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        normalize_fqn(&s).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

const WRAPPING: &[char] = &['`', '\'', '"', '*', '[', ']', '{', '}'];
const TRAILING: &[char] = &['.', ',', ';', ':', '!', '?'];

fn strip_decoration(s: &str) -> &str {
    let mut s = s.trim();
    loop {
        let unwrapped = s
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .or_else(|| s.strip_prefix('<').and_then(|t| t.strip_suffix('>')))
            .unwrap_or(s);
        let next = unwrapped
            .trim_start_matches(WRAPPING)
            .trim_end_matches(WRAPPING)
            .trim_end_matches(TRAILING)
            .trim();
        if next.len() == s.len() {
            return s;
        }
        s = next;
    }
}

/// Splits off a trailing generic argument list or call parenthesis group.
fn strip_trailing_group(s: &str, open: char, close: char) -> Option<&str> {
    if !s.ends_with(close) {
        return None;
    }
    let mut depth = 0usize;
    for (idx, c) in s.char_indices().rev() {
        if c == close {
            depth += 1;
        } else if c == open {
            depth -= 1;
            if depth == 0 {
                return Some(&s[..idx]);
            }
        }
    }
    None
}

/// Parses a raw mention into a [`Fqn`].
///
/// Surrounding backticks, quotes and sentence punctuation are removed, a
/// trailing `(...)` is recorded as a call suffix, `#` member separators are
/// read as `.`, and at least two identifier segments must remain.
pub fn normalize_fqn(raw: &str) -> Result<Fqn, ModelError> {
    let not_fqn = |reason: &str| ModelError::NotAFqn {
        raw: raw.to_string(),
        reason: reason.to_string(),
    };
    let mut body = strip_decoration(raw);
    let mut call_suffix = false;
    loop {
        if let Some(rest) = strip_trailing_group(body, '(', ')') {
            call_suffix = true;
            body = rest.trim_end();
        } else if body.ends_with('>') {
            match strip_trailing_group(body, '<', '>') {
                Some(rest) => body = rest.trim_end(),
                None => break,
            }
        } else {
            break;
        }
        body = strip_decoration(body);
    }
    if body.is_empty() {
        return Err(not_fqn("empty"));
    }
    let segments: Vec<String> = body
        .split(['.', '#'])
        .map(|seg| seg.trim().to_string())
        .collect();
    if let Some(bad) = segments.iter().find(|seg| !is_identifier(seg)) {
        return Err(not_fqn(&format!("segment {bad:?} is not an identifier")));
    }
    if segments.len() < 2 {
        return Err(not_fqn("fewer than two segments"));
    }
    Ok(Fqn {
        dotted: segments.join(".").into(),
        raw: raw.into(),
        call_suffix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    Fqn,
    SimpleName,
    PartiallyQualified,
}

/// An API as it appears in text. `span` holds byte offsets into the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiMention {
    pub surface: String,
    pub span: (usize, usize),
    pub kind: MentionKind,
}

/// Unordered pair of distinct APIs, stored in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApiPair {
    first: Fqn,
    second: Fqn,
}

impl ApiPair {
    pub fn first(&self) -> &Fqn {
        &self.first
    }

    pub fn second(&self) -> &Fqn {
        &self.second
    }

    pub fn contains(&self, api: &Fqn) -> bool {
        &self.first == api || &self.second == api
    }

    /// The other member of the pair, if `api` belongs to it.
    pub fn partner(&self, api: &Fqn) -> Option<&Fqn> {
        if &self.first == api {
            Some(&self.second)
        } else if &self.second == api {
            Some(&self.first)
        } else {
            None
        }
    }
}

impl Serialize for ApiPair {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.first, &self.second).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ApiPair {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (a, b) = <(Fqn, Fqn)>::deserialize(deserializer)?;
        make_pair(a, b).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ApiPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}>", self.first, self.second)
    }
}

pub fn make_pair(a: Fqn, b: Fqn) -> Result<ApiPair, ModelError> {
    match a.cmp(&b) {
        Ordering::Equal => Err(ModelError::SelfPair(a.normalized())),
        Ordering::Less => Ok(ApiPair { first: a, second: b }),
        Ordering::Greater => Ok(ApiPair { first: b, second: a }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeFragment {
    pub api: Fqn,
    pub kind: KnowledgeKind,
    pub text: String,
    /// Identifies the backend call that produced the text.
    pub provenance: String,
}

impl KnowledgeFragment {
    pub fn new(
        api: Fqn,
        kind: KnowledgeKind,
        text: impl Into<String>,
        provenance: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyFragment(api.normalized()));
        }
        Ok(KnowledgeFragment {
            api,
            kind,
            text,
            provenance: provenance.into(),
        })
    }
}

/// Mined knowledge for both members of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBlock {
    pair: ApiPair,
    fragments: BTreeMap<(KnowledgeKind, Fqn), KnowledgeFragment>,
}

impl KnowledgeBlock {
    pub fn new(pair: ApiPair) -> Self {
        KnowledgeBlock {
            pair,
            fragments: BTreeMap::new(),
        }
    }

    pub fn pair(&self) -> &ApiPair {
        &self.pair
    }

    /// Adds a fragment, replacing any previous one for the same (api, kind).
    pub fn insert(&mut self, fragment: KnowledgeFragment) -> Result<(), ModelError> {
        if !self.pair.contains(&fragment.api) {
            return Err(ModelError::ForeignFragment {
                api: fragment.api.normalized(),
                pair: self.pair.to_string(),
            });
        }
        self.fragments
            .insert((fragment.kind, fragment.api.clone()), fragment);
        Ok(())
    }

    pub fn get(&self, api: &Fqn, kind: KnowledgeKind) -> Option<&KnowledgeFragment> {
        self.fragments.get(&(kind, api.clone()))
    }

    /// True when both APIs have a fragment of `kind`.
    pub fn has_kind(&self, kind: KnowledgeKind) -> bool {
        self.get(&self.pair.first, kind).is_some() && self.get(&self.pair.second, kind).is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    /// Fragments in (kind, api) order.
    pub fn fragments(&self) -> impl Iterator<Item = &KnowledgeFragment> {
        self.fragments.values()
    }
}

/// Prompt style of a relation decider unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeciderStyle {
    YesNo,
    Statement,
    MultiChoice,
}

impl DeciderStyle {
    pub const ALL: [DeciderStyle; 3] = [
        DeciderStyle::YesNo,
        DeciderStyle::Statement,
        DeciderStyle::MultiChoice,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitVote {
    pub unit: DeciderStyle,
    pub relation: RelationType,
    pub answer: Answer,
    /// Raw backend text; directional answers are joined with " | ".
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl UnitVote {
    pub fn new(unit: DeciderStyle, relation: RelationType, answer: Answer, raw: impl Into<String>) -> Self {
        UnitVote {
            unit,
            relation,
            answer,
            raw: raw.into(),
            note: None,
        }
    }

    pub fn abstain(unit: DeciderStyle, relation: RelationType, note: impl Into<String>) -> Self {
        UnitVote {
            unit,
            relation,
            answer: Answer::Abstain,
            raw: String::new(),
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub pair: ApiPair,
    pub relation: RelationType,
    pub holds: bool,
    #[serde(default)]
    pub votes: Vec<UnitVote>,
}

/// Non-fatal problem recorded while processing a text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Warning {
    /// Unit or stage that raised it, e.g. `parser.fqn_inference`.
    pub source: String,
    pub message: String,
}

impl Warning {
    pub fn new(source: impl Into<String>, message: impl Into<String>) -> Self {
        Warning {
            source: source.into(),
            message: message.into(),
        }
    }
}
