//! Relation decision: three prompt styles per relation and a majority vote.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::Complete;
use crate::knowledge::format_block;
use crate::model::{Answer, ApiPair, DeciderStyle, KnowledgeBlock, KnowledgeKind, RelationType, UnitVote, Verdict};
use crate::prompting::{
    parse_choice_answer, parse_statement_answer, parse_yes_no, render, units, ChoiceAnswer, PromptCatalog,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error("votes target different relations: {0} and {1}")]
    MixedTarget(RelationType, RelationType),
    #[error("expected 1 to 3 votes, got {0}")]
    VoteCount(usize),
}

/// Which decider units run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecideMode {
    /// All three units, majority vote.
    Full,
    /// Yes/no question unit only.
    Ard1,
    /// Statement judgement unit only.
    Ard2,
    /// Multiple choice unit only.
    Ard3,
}

impl DecideMode {
    pub fn styles(self) -> &'static [DeciderStyle] {
        match self {
            DecideMode::Full => &DeciderStyle::ALL,
            DecideMode::Ard1 => &[DeciderStyle::YesNo],
            DecideMode::Ard2 => &[DeciderStyle::Statement],
            DecideMode::Ard3 => &[DeciderStyle::MultiChoice],
        }
    }
}

impl fmt::Display for DecideMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecideMode::Full => "full",
            DecideMode::Ard1 => "ard1",
            DecideMode::Ard2 => "ard2",
            DecideMode::Ard3 => "ard3",
        })
    }
}

impl FromStr for DecideMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(DecideMode::Full),
            "ard1" => Ok(DecideMode::Ard1),
            "ard2" => Ok(DecideMode::Ard2),
            "ard3" => Ok(DecideMode::Ard3),
            other => Err(format!("unknown decide mode {other:?}")),
        }
    }
}

/// Yes/no question per relation, with `{{API1}}` / `{{API2}}` slots.
pub fn yes_no_question(relation: RelationType) -> &'static str {
    match relation {
        RelationType::FunctionSimilarity => "Based on the knowledge above, do {{API1}} and {{API2}} have similar usage?",
        RelationType::BehaviorDifference => "Do {{API1}} and {{API2}} have similar usage and different behaviors?",
        RelationType::EfficiencyComparison => "Do {{API1}} and {{API2}} have efficiency comparison?",
        RelationType::LogicConstraint => "Is there a logical order when using {{API1}} and {{API2}}?",
        // Asked in both directions.
        RelationType::FunctionReplace => "Can {{API1}} used in the unavailable of {{API2}}?",
        RelationType::FunctionCollaboration => "Is there a task that requires {{API1}} and {{API2}} to cooperate?",
        RelationType::TypeConversion => "Can the data type of {{API1}} and {{API2}} be converted to each other?",
    }
}

/// Declarative counterpart of [`yes_no_question`].
pub fn statement_claim(relation: RelationType) -> &'static str {
    match relation {
        RelationType::FunctionSimilarity => "{{API1}} and {{API2}} have similar usage",
        RelationType::BehaviorDifference => "{{API1}} and {{API2}} have similar usage and different behaviors",
        RelationType::EfficiencyComparison => "{{API1}} and {{API2}} have efficiency comparison",
        RelationType::LogicConstraint => "There is a logical order when using {{API1}} and {{API2}}",
        RelationType::FunctionReplace => "{{API1}} or {{API2}} can be used in the unavailable of the other",
        RelationType::FunctionCollaboration => "There is a task that requires {{API1}} and {{API2}} to cooperate",
        RelationType::TypeConversion => "The data type of {{API1}} and {{API2}} can be converted to each other",
    }
}

/// Knowledge kinds the yes/no and statement units need for `relation`.
pub fn required_knowledge(relation: RelationType) -> BTreeSet<KnowledgeKind> {
    let own = relation.knowledge_kind();
    match relation {
        RelationType::BehaviorDifference | RelationType::LogicConstraint | RelationType::EfficiencyComparison => {
            BTreeSet::from([KnowledgeKind::Usage, own])
        }
        _ => BTreeSet::from([own]),
    }
}

/// Knowledge kinds a mode needs to decide the given relations.
pub fn kinds_for(mode: DecideMode, relations: &[RelationType]) -> BTreeSet<KnowledgeKind> {
    if mode.styles().contains(&DeciderStyle::MultiChoice) {
        return KnowledgeKind::ALL.into_iter().collect();
    }
    relations.iter().flat_map(|r| required_knowledge(*r)).collect()
}

fn missing_knowledge(block: &KnowledgeBlock, relation: RelationType) -> Option<String> {
    let missing: Vec<&str> = required_knowledge(relation)
        .into_iter()
        .filter(|k| !block.has_kind(*k))
        .map(KnowledgeKind::as_str)
        .collect();
    (!missing.is_empty()).then(|| format!("missing knowledge: {}", missing.join(", ")))
}

fn ask_parsed(
    unit: &str,
    bindings: &[(&str, &str)],
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
    parse: fn(&str) -> Answer,
) -> Result<(Answer, String), String> {
    let template = catalog.get(unit).map_err(|e| e.to_string())?;
    let prompt = render(template, bindings).map_err(|e| e.to_string())?;
    let res = gateway.ask(&prompt).map_err(|e| e.to_string())?;
    Ok((parse(&res.text), res.text))
}

/// Yes/no question unit. Function-replace is asked in both directions and
/// holds if either direction says yes.
pub fn decide_yes_no(
    block: &KnowledgeBlock,
    relation: RelationType,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> UnitVote {
    let style = DeciderStyle::YesNo;
    if let Some(note) = missing_knowledge(block, relation) {
        return UnitVote::abstain(style, relation, note);
    }
    let knowledge = format_block(block, &required_knowledge(relation).into_iter().collect::<Vec<_>>(), false);
    let (a, b) = (block.pair().first().normalized(), block.pair().second().normalized());
    let unit = units::yes_no(relation);
    let mut directions = vec![(a.as_str(), b.as_str())];
    if relation == RelationType::FunctionReplace {
        directions.push((b.as_str(), a.as_str()));
    }
    let mut answers = Vec::new();
    let mut raws = Vec::new();
    for (api1, api2) in directions {
        let bindings = [("KNOWLEDGE", knowledge.as_str()), ("API1", api1), ("API2", api2)];
        match ask_parsed(&unit, &bindings, catalog, gateway, parse_yes_no) {
            Ok((answer, raw)) => {
                answers.push(answer);
                raws.push(raw);
            }
            Err(e) => return UnitVote::abstain(style, relation, e),
        }
    }
    let answer = if answers.contains(&Answer::Yes) {
        Answer::Yes
    } else if answers.contains(&Answer::No) {
        Answer::No
    } else {
        Answer::Abstain
    };
    UnitVote::new(style, relation, answer, raws.join(" | "))
}

/// Statement correctness unit.
pub fn decide_statement(
    block: &KnowledgeBlock,
    relation: RelationType,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> UnitVote {
    let style = DeciderStyle::Statement;
    if let Some(note) = missing_knowledge(block, relation) {
        return UnitVote::abstain(style, relation, note);
    }
    let knowledge = format_block(block, &required_knowledge(relation).into_iter().collect::<Vec<_>>(), false);
    let (a, b) = (block.pair().first().normalized(), block.pair().second().normalized());
    let bindings = [("KNOWLEDGE", knowledge.as_str()), ("API1", a.as_str()), ("API2", b.as_str())];
    match ask_parsed(&units::statement(relation), &bindings, catalog, gateway, parse_statement_answer) {
        Ok((answer, raw)) => UnitVote::new(style, relation, answer, raw),
        Err(e) => UnitVote::abstain(style, relation, e),
    }
}

/// Outcome of the single multiple-choice call for a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceOutcome {
    pub answer: ChoiceAnswer,
    pub raw: String,
    pub error: Option<String>,
}

impl ChoiceOutcome {
    /// Yes iff the chosen relation is `relation`; `unknown` is No for all.
    pub fn vote(&self, relation: RelationType) -> UnitVote {
        let style = DeciderStyle::MultiChoice;
        if let Some(e) = &self.error {
            return UnitVote::abstain(style, relation, e.clone());
        }
        let answer = match self.answer {
            ChoiceAnswer::Relation(r) if r == relation => Answer::Yes,
            _ => Answer::No,
        };
        UnitVote::new(style, relation, answer, self.raw.clone())
    }
}

/// One multiple-choice call over the full seven-kind knowledge block.
pub fn choose(block: &KnowledgeBlock, catalog: &PromptCatalog, gateway: &dyn Complete) -> ChoiceOutcome {
    let knowledge = format_block(block, &KnowledgeKind::ALL, true);
    let (a, b) = (block.pair().first().normalized(), block.pair().second().normalized());
    let bindings = [("KNOWLEDGE", knowledge.as_str()), ("API1", a.as_str()), ("API2", b.as_str())];
    let result = catalog
        .get(units::CHOICE)
        .map_err(|e| e.to_string())
        .and_then(|t| render(t, &bindings).map_err(|e| e.to_string()))
        .and_then(|p| gateway.ask(&p).map_err(|e| e.to_string()));
    match result {
        Ok(res) => ChoiceOutcome {
            answer: parse_choice_answer(&res.text, &RelationType::ALL),
            raw: res.text,
            error: None,
        },
        Err(e) => ChoiceOutcome {
            answer: ChoiceAnswer::Unknown,
            raw: String::new(),
            error: Some(e),
        },
    }
}

/// Multiple-choice votes for each relation under test, from one call.
pub fn decide_multi_choice(
    block: &KnowledgeBlock,
    relations: &[RelationType],
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Vec<UnitVote> {
    let outcome = choose(block, catalog, gateway);
    relations.iter().map(|r| outcome.vote(*r)).collect()
}

/// More Yes than No; abstentions count for neither side.
pub fn majority(answers: &[Answer]) -> bool {
    let yes = answers.iter().filter(|a| **a == Answer::Yes).count();
    let no = answers.iter().filter(|a| **a == Answer::No).count();
    yes > no
}

pub fn aggregate(pair: &ApiPair, votes: Vec<UnitVote>) -> Result<Verdict, DecideError> {
    if votes.is_empty() || votes.len() > 3 {
        return Err(DecideError::VoteCount(votes.len()));
    }
    let relation = votes[0].relation;
    if let Some(other) = votes.iter().find(|v| v.relation != relation) {
        return Err(DecideError::MixedTarget(relation, other.relation));
    }
    let answers: Vec<Answer> = votes.iter().map(|v| v.answer).collect();
    Ok(Verdict {
        pair: pair.clone(),
        relation,
        holds: majority(&answers),
        votes,
    })
}

/// Decides relations for one pair, sharing the multiple-choice call.
pub struct PairDecider<'a> {
    block: &'a KnowledgeBlock,
    catalog: &'a PromptCatalog,
    gateway: &'a dyn Complete,
    choice: OnceLock<ChoiceOutcome>,
}

impl<'a> PairDecider<'a> {
    pub fn new(block: &'a KnowledgeBlock, catalog: &'a PromptCatalog, gateway: &'a dyn Complete) -> Self {
        PairDecider {
            block,
            catalog,
            gateway,
            choice: OnceLock::new(),
        }
    }

    fn vote(&self, style: DeciderStyle, relation: RelationType) -> UnitVote {
        match style {
            DeciderStyle::YesNo => decide_yes_no(self.block, relation, self.catalog, self.gateway),
            DeciderStyle::Statement => decide_statement(self.block, relation, self.catalog, self.gateway),
            DeciderStyle::MultiChoice => self
                .choice
                .get_or_init(|| choose(self.block, self.catalog, self.gateway))
                .vote(relation),
        }
    }

    /// Runs the units selected by `mode`; votes are in style order.
    pub fn decide(&self, relation: RelationType, mode: DecideMode) -> Verdict {
        let votes: Vec<UnitVote> = std::thread::scope(|s| {
            let handles: Vec<_> = mode
                .styles()
                .iter()
                .map(|style| s.spawn(move || self.vote(*style, relation)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("decider unit panicked")).collect()
        });
        aggregate(self.block.pair(), votes).expect("votes share one relation")
    }
}

/// Single-relation convenience over [`PairDecider`].
pub fn decide(
    block: &KnowledgeBlock,
    relation: RelationType,
    mode: DecideMode,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Verdict {
    PairDecider::new(block, catalog, gateway).decide(relation, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_knowledge_table() {
        use KnowledgeKind::*;
        assert_eq!(required_knowledge(RelationType::BehaviorDifference), BTreeSet::from([Usage, Characteristics]));
        assert_eq!(required_knowledge(RelationType::LogicConstraint), BTreeSet::from([Usage, Condition]));
        assert_eq!(required_knowledge(RelationType::EfficiencyComparison), BTreeSet::from([Usage, Performance]));
        assert_eq!(required_knowledge(RelationType::FunctionSimilarity), BTreeSet::from([Usage]));
        assert_eq!(required_knowledge(RelationType::FunctionReplace), BTreeSet::from([UsageScenario]));
        assert_eq!(required_knowledge(RelationType::FunctionCollaboration), BTreeSet::from([TaskScenario]));
        assert_eq!(required_knowledge(RelationType::TypeConversion), BTreeSet::from([TypeInfo]));
        assert_eq!(kinds_for(DecideMode::Full, &[RelationType::FunctionSimilarity]).len(), 7);
        assert_eq!(kinds_for(DecideMode::Ard1, &[RelationType::EfficiencyComparison]), BTreeSet::from([Usage, Performance]));
    }

    #[test]
    fn majority_rule() {
        use Answer::*;
        assert!(majority(&[Yes, Yes, No]));
        assert!(!majority(&[No, No, Yes]));
        assert!(!majority(&[Yes, No, Abstain]));
        assert!(!majority(&[Abstain, Abstain, Abstain]));
        assert!(majority(&[Yes, Abstain, Abstain]));
    }

    #[test]
    fn mode_parsing() {
        for m in [DecideMode::Full, DecideMode::Ard1, DecideMode::Ard2, DecideMode::Ard3] {
            assert_eq!(m.to_string().parse::<DecideMode>().unwrap(), m);
        }
        assert!("ard4".parse::<DecideMode>().is_err());
    }

    #[test]
    fn bundled_decider_prompts_contain_questions() {
        let catalog = PromptCatalog::bundled();
        let fill = |s: &str| s.replace("{{API1}}", "a.X").replace("{{API2}}", "a.Y");
        for r in RelationType::ALL {
            let bindings = [("KNOWLEDGE", "k"), ("API1", "a.X"), ("API2", "a.Y")];
            let yn = render(catalog.get(&units::yes_no(r)).unwrap(), &bindings).unwrap();
            assert!(yn.contains(&fill(yes_no_question(r))), "{r}");
            let st = render(catalog.get(&units::statement(r)).unwrap(), &bindings).unwrap();
            assert!(st.contains(&fill(statement_claim(r))), "{r}");
        }
        let yn = render(
            catalog.get(&units::yes_no(RelationType::FunctionSimilarity)).unwrap(),
            &[("KNOWLEDGE", "k"), ("API1", "a.X"), ("API2", "a.Y")],
        )
        .unwrap();
        assert!(yn.contains("Answer questions based on the knowledge block of APIs"));
        let choice = render(catalog.get(units::CHOICE).unwrap(), &[("KNOWLEDGE", "k"), ("API1", "a"), ("API2", "b")]).unwrap();
        assert!(choice.starts_with("Choose the relation between"));
        for r in RelationType::ALL {
            assert!(choice.contains(r.definition()));
        }
        assert!(choice.contains("unknown"));
    }
}
