//! End-to-end relation inference: parse, mine, decide. Also the single-prompt
//! direct and chain-of-thought variants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decider::{kinds_for, DecideMode, PairDecider};
use crate::gateway::{Complete, GatewayStats, Tracked};
use crate::knowledge::{combine, FragmentCache, KnowledgeError};
use crate::model::{
    make_pair, normalize_fqn, ApiPair, DeciderStyle, Fqn, KnowledgeFragment, KnowledgeKind, RelationType, Verdict, Warning,
};
use crate::parser::parse;
use crate::prompting::{render, units, PromptCatalog};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("relation subset is empty")]
    NoRelations,
    #[error("unknown variant {0:?}; expected full, direct, cot, ard1, ard2 or ard3")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Direct,
    Cot,
    Ard1,
    Ard2,
    Ard3,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Full,
        Variant::Direct,
        Variant::Cot,
        Variant::Ard1,
        Variant::Ard2,
        Variant::Ard3,
    ];

    /// Decider mode for the chained variants; `None` for single-prompt ones.
    pub fn decide_mode(self) -> Option<DecideMode> {
        match self {
            Variant::Full => Some(DecideMode::Full),
            Variant::Ard1 => Some(DecideMode::Ard1),
            Variant::Ard2 => Some(DecideMode::Ard2),
            Variant::Ard3 => Some(DecideMode::Ard3),
            Variant::Direct | Variant::Cot => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Direct => "direct",
            Variant::Cot => "cot",
            Variant::Ard1 => "ard1",
            Variant::Ard2 => "ard2",
            Variant::Ard3 => "ard3",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or(PipelineError::UnknownVariant(s))
    }
}

/// What to infer. Backend and storage settings live with the gateway.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub variant: Variant,
    pub relations: Vec<RelationType>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            variant: Variant::Full,
            relations: RelationType::ALL.to_vec(),
        }
    }
}

impl RunSettings {
    pub fn new(variant: Variant, relations: impl IntoIterator<Item = RelationType>) -> Result<Self, PipelineError> {
        let relations: Vec<RelationType> = relations.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if relations.is_empty() {
            return Err(PipelineError::NoRelations);
        }
        Ok(RunSettings { variant, relations })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportStats {
    pub gateway_calls: u64,
    pub cache_hits: u64,
    pub elapsed_ms: u64,
}

impl ReportStats {
    fn from_gateway(stats: GatewayStats, started: Instant) -> Self {
        ReportStats {
            gateway_calls: stats.gateway_calls,
            cache_hits: stats.cache_hits,
            elapsed_ms: started.elapsed().as_millis() as u64,
        }
    }
}

/// Output for one text. `stats` is timing-dependent and left out of the
/// serialized form so replayed reports compare byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationReport {
    pub source_id: String,
    pub variant: Variant,
    pub triples: Vec<Verdict>,
    #[serde(default)]
    pub warnings: Vec<Warning>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub stats: ReportStats,
}

impl RelationReport {
    fn empty(source_id: &str, variant: Variant) -> Self {
        RelationReport {
            source_id: source_id.to_string(),
            variant,
            triples: Vec::new(),
            warnings: Vec::new(),
            error: None,
            stats: ReportStats::default(),
        }
    }

    /// Triples that hold.
    pub fn holding(&self) -> impl Iterator<Item = &Verdict> {
        self.triples.iter().filter(|t| t.holds)
    }
}

/// Runs one text through the variant selected in `settings`.
pub fn infer_relations(
    source_id: &str,
    text: &str,
    settings: &RunSettings,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> RelationReport {
    infer_with_cache(source_id, text, settings, catalog, gateway, &FragmentCache::new())
}

/// Runs a batch of `(id, text)` inputs concurrently; reports keep input order.
/// Knowledge mined for an API is reused across the batch.
pub fn infer_batch(
    inputs: &[(String, String)],
    settings: &RunSettings,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Vec<RelationReport> {
    let fragments = FragmentCache::new();
    inputs
        .par_iter()
        .map(|(id, text)| infer_with_cache(id, text, settings, catalog, gateway, &fragments))
        .collect()
}

fn infer_with_cache(
    source_id: &str,
    text: &str,
    settings: &RunSettings,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
    fragments: &FragmentCache,
) -> RelationReport {
    let started = Instant::now();
    let tracked = Tracked::new(gateway);
    let mut report = match settings.variant.decide_mode() {
        Some(mode) => run_chain(source_id, text, mode, &settings.relations, catalog, &tracked, fragments),
        None => run_single_prompt(source_id, text, settings.variant, catalog, &tracked),
    };
    if report.error.is_none() && settings.variant.decide_mode().is_none() {
        report.triples.retain(|t| settings.relations.contains(&t.relation));
    }
    report.stats = ReportStats::from_gateway(tracked.stats(), started);
    report
}

fn run_chain(
    source_id: &str,
    text: &str,
    mode: DecideMode,
    relations: &[RelationType],
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
    fragments: &FragmentCache,
) -> RelationReport {
    let variant = match mode {
        DecideMode::Full => Variant::Full,
        DecideMode::Ard1 => Variant::Ard1,
        DecideMode::Ard2 => Variant::Ard2,
        DecideMode::Ard3 => Variant::Ard3,
    };
    let mut report = RelationReport::empty(source_id, variant);
    let parsed = match parse(source_id, text, catalog, gateway) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.warnings.extend(parsed.warnings);
    if parsed.pairs.is_empty() {
        return report;
    }

    let kinds: Vec<KnowledgeKind> = kinds_for(mode, relations).into_iter().collect();
    let jobs: Vec<_> = parsed
        .fqns
        .iter()
        .flat_map(|api| kinds.iter().map(move |k| (api, *k)))
        .collect();
    let mined: Vec<_> = jobs
        .par_iter()
        .map(|(api, kind)| fragments.get_or_mine(api, *kind, catalog, gateway))
        .collect();
    let mut by_api = BTreeMap::new();
    for ((api, kind), result) in jobs.into_iter().zip(mined) {
        match result {
            Ok(f) => by_api.entry(api.clone()).or_insert_with(Vec::new).push(f),
            Err(KnowledgeError::EmptyKnowledge { api, kind }) => report
                .warnings
                .push(Warning::new(units::mining(kind), format!("empty {kind} knowledge for {api}"))),
            Err(e) => {
                report.error = Some(format!("mining {kind} knowledge for {api}: {e}"));
                return report;
            }
        }
    }

    let verdicts: Vec<Vec<Verdict>> = parsed
        .pairs
        .par_iter()
        .map(|pair| decide_pair(pair, &by_api, mode, relations, catalog, gateway))
        .collect();
    for v in verdicts.into_iter().flatten() {
        for vote in &v.votes {
            if let Some(note) = &vote.note {
                report
                    .warnings
                    .push(Warning::new(unit_source(vote.unit), format!("{} {}: {note}", v.pair, v.relation)));
            }
        }
        report.triples.push(v);
    }
    report.triples.sort_by(|a, b| (&a.pair, a.relation).cmp(&(&b.pair, b.relation)));
    report
}

fn unit_source(style: DeciderStyle) -> &'static str {
    match style {
        DeciderStyle::YesNo => "decider.yes_no",
        DeciderStyle::Statement => "decider.statement",
        DeciderStyle::MultiChoice => units::CHOICE,
    }
}

fn decide_pair(
    pair: &ApiPair,
    by_api: &BTreeMap<Fqn, Vec<KnowledgeFragment>>,
    mode: DecideMode,
    relations: &[RelationType],
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Vec<Verdict> {
    let frags = [pair.first(), pair.second()]
        .into_iter()
        .flat_map(|api| by_api.get(api).into_iter().flatten().cloned());
    let block = combine(pair, frags).expect("fragments belong to the pair");
    let decider = PairDecider::new(&block, catalog, gateway);
    std::thread::scope(|s| {
        let handles: Vec<_> = relations
            .iter()
            .map(|r| {
                let decider = &decider;
                s.spawn(move || decider.decide(*r, mode))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("decider panicked")).collect()
    })
}

fn run_single_prompt(
    source_id: &str,
    text: &str,
    variant: Variant,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> RelationReport {
    let result = match variant {
        Variant::Cot => run_cot(source_id, text, catalog, gateway),
        _ => run_direct(source_id, text, catalog, gateway),
    };
    result.unwrap_or_else(|e| {
        let mut report = RelationReport::empty(source_id, variant);
        report.error = Some(e);
        report
    })
}

fn ask_unit(unit: &str, text: &str, catalog: &PromptCatalog, gateway: &dyn Complete) -> Result<String, String> {
    let template = catalog.get(unit).map_err(|e| e.to_string())?;
    let prompt = render(template, &[("TEXT", text)]).map_err(|e| e.to_string())?;
    gateway.ask(&prompt).map(|r| r.text).map_err(|e| e.to_string())
}

/// One prompt asking for all relations in the text.
pub fn run_direct(
    source_id: &str,
    text: &str,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Result<RelationReport, String> {
    let raw = ask_unit(units::DIRECT, text, catalog, gateway)?;
    let mut report = RelationReport::empty(source_id, Variant::Direct);
    let (triples, warnings) = parse_triples(&raw, units::DIRECT);
    report.triples = triples;
    report.warnings = warnings;
    Ok(report)
}

/// One reasoning prompt; only the section after the last `Final answer:` is
/// read.
pub fn run_cot(
    source_id: &str,
    text: &str,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Result<RelationReport, String> {
    let raw = ask_unit(units::COT, text, catalog, gateway)?;
    let mut report = RelationReport::empty(source_id, Variant::Cot);
    match final_section(&raw) {
        Some(section) => {
            let (triples, warnings) = parse_triples(section, units::COT);
            report.triples = triples;
            report.warnings = warnings;
        }
        None => report
            .warnings
            .push(Warning::new(units::COT, "response has no \"Final answer:\" section")),
    }
    Ok(report)
}

const FINAL_MARKER: &str = "final answer:";

fn final_section(raw: &str) -> Option<&str> {
    let lower = raw.to_ascii_lowercase();
    lower.rfind(FINAL_MARKER).map(|i| &raw[i + FINAL_MARKER.len()..])
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '(' | '<' | '[' => depth += 1,
            ')' | '>' | ']' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_triple_line(line: &str) -> Result<(ApiPair, RelationType), String> {
    let body = line
        .trim_start_matches(|c: char| c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c.is_whitespace())
        .trim_end_matches(['.', ';', ',', ' '])
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or_else(|| format!("not a triple: {line:?}"))?;
    let parts = split_top_level(body);
    let [a, b, rel] = parts.as_slice() else {
        return Err(format!("expected 3 fields, got {}: {line:?}", parts.len()));
    };
    let a = normalize_fqn(a).map_err(|e| e.to_string())?;
    let b = normalize_fqn(b).map_err(|e| e.to_string())?;
    let relation = rel.trim().parse::<RelationType>().map_err(|e| e.to_string())?;
    Ok((make_pair(a, b).map_err(|e| e.to_string())?, relation))
}

/// Reads `(api1, api2, relation)` lines. A lone `none` means no relations;
/// anything else that does not parse is dropped with a warning.
pub fn parse_triples(raw: &str, source: &str) -> (Vec<Verdict>, Vec<Warning>) {
    let mut found = BTreeSet::new();
    let mut warnings = Vec::new();
    let lines: Vec<&str> = raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.len() == 1 && lines[0].trim_end_matches('.').eq_ignore_ascii_case("none") {
        return (Vec::new(), warnings);
    }
    for line in &lines {
        match parse_triple_line(line) {
            Ok(t) => {
                found.insert(t);
            }
            Err(e) => warnings.push(Warning::new(source, e)),
        }
    }
    if found.is_empty() && warnings.is_empty() {
        warnings.push(Warning::new(source, "response contains no relation triples"));
    }
    let triples = found
        .into_iter()
        .map(|(pair, relation)| Verdict {
            pair,
            relation,
            holds: true,
            votes: Vec::new(),
        })
        .collect();
    (triples, warnings)
}
