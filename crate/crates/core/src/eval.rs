//! Gold datasets, relation P/R/F1, and per-unit accuracy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{make_pair, normalize_fqn, ApiPair, Fqn, RelationType, Warning};
use crate::pipeline::RelationReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{path}:{line}: {reason}")]
    Schema { path: String, line: usize, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("gold list is empty")]
    EmptyGold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldApi {
    pub mention: String,
    pub fqn: Fqn,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldRelation {
    pub api1: Fqn,
    pub api2: Fqn,
    #[serde(rename = "type")]
    pub relation: RelationType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub text: String,
    pub apis: Vec<GoldApi>,
    /// Canonical (`api1 < api2`), deduplicated.
    pub relations: Vec<GoldRelation>,
}

/// A scored unit: one relation between one pair in one text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub id: String,
    pub pair: ApiPair,
    pub relation: RelationType,
}

impl GoldRecord {
    pub fn triples(&self) -> Vec<Triple> {
        self.relations
            .iter()
            .map(|r| Triple {
                id: self.id.clone(),
                pair: make_pair(r.api1.clone(), r.api2.clone()).expect("validated on load"),
                relation: r.relation,
            })
            .collect()
    }

    /// Checks endpoints, canonicalizes pairs and drops duplicate relations.
    pub fn validate(mut self) -> Result<(GoldRecord, Vec<Warning>), String> {
        if self.id.trim().is_empty() {
            return Err("record has an empty id".into());
        }
        let known: BTreeSet<&Fqn> = self.apis.iter().map(|a| &a.fqn).collect();
        let mut seen = BTreeSet::new();
        let mut warnings = Vec::new();
        let mut relations = Vec::new();
        for r in std::mem::take(&mut self.relations) {
            for end in [&r.api1, &r.api2] {
                if !known.contains(end) {
                    return Err(format!("record {:?}: relation endpoint {end} is not among its apis", self.id));
                }
            }
            let pair = make_pair(r.api1, r.api2).map_err(|e| format!("record {:?}: {e}", self.id))?;
            if !seen.insert((pair.clone(), r.relation)) {
                warnings.push(Warning::new(
                    "eval.load",
                    format!("record {:?}: duplicate {} {} dropped", self.id, pair, r.relation),
                ));
                continue;
            }
            relations.push(GoldRelation {
                api1: pair.first().clone(),
                api2: pair.second().clone(),
                relation: r.relation,
            });
        }
        relations.sort();
        self.relations = relations;
        Ok((self, warnings))
    }
}

/// One prediction row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub api1: Fqn,
    pub api2: Fqn,
    pub relation: RelationType,
    pub holds: bool,
}

impl PredictionRow {
    pub fn triple(&self) -> Result<Triple, String> {
        let pair = make_pair(self.api1.clone(), self.api2.clone()).map_err(|e| e.to_string())?;
        Ok(Triple {
            id: self.id.clone(),
            pair,
            relation: self.relation,
        })
    }
}

/// Flattens a report into prediction rows.
pub fn prediction_rows(report: &RelationReport) -> Vec<PredictionRow> {
    report
        .triples
        .iter()
        .map(|t| PredictionRow {
            id: report.source_id.clone(),
            api1: t.pair.first().clone(),
            api2: t.pair.second().clone(),
            relation: t.relation,
            holds: t.holds,
        })
        .collect()
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, EvalError> {
    let shown = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| EvalError::Schema {
            path: shown.clone(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Loads a JSONL gold file, one record per line.
pub fn load_dataset(path: &Path) -> Result<(Vec<GoldRecord>, Vec<Warning>), EvalError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, record) in read_jsonl::<GoldRecord>(path)? {
        let schema = |reason| EvalError::Schema {
            path: path.display().to_string(),
            line,
            reason,
        };
        let (record, w) = record.validate().map_err(schema)?;
        if !ids.insert(record.id.clone()) {
            return Err(schema(format!("duplicate record id {:?}", record.id)));
        }
        warnings.extend(w);
        records.push(record);
    }
    Ok((records, warnings))
}

/// Loads prediction rows. Rows that are not pairs of distinct APIs are schema
/// errors.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>, EvalError> {
    read_jsonl::<PredictionRow>(path)?
        .into_iter()
        .map(|(line, row)| {
            row.triple().map_err(|reason| EvalError::Schema {
                path: path.display().to_string(),
                line,
                reason,
            })?;
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_relation: BTreeMap<RelationType, Metrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
            per_relation: BTreeMap::new(),
        }
    }
}

fn counts(predicted: &BTreeSet<&Triple>, gold: &BTreeSet<&Triple>) -> (u64, u64, u64) {
    let tp = predicted.intersection(gold).count() as u64;
    (tp, predicted.len() as u64 - tp, gold.len() as u64 - tp)
}

/// Micro-averaged exact-match scores over (text, pair, relation), with a
/// per-relation breakdown for every relation seen on either side.
pub fn score_relations(predicted: &[Triple], gold: &[Triple]) -> Metrics {
    let predicted: BTreeSet<&Triple> = predicted.iter().collect();
    let gold: BTreeSet<&Triple> = gold.iter().collect();
    let (tp, fp, fn_) = counts(&predicted, &gold);
    let mut overall = Metrics::from_counts(tp, fp, fn_);
    let relations: BTreeSet<RelationType> = predicted.iter().chain(gold.iter()).map(|t| t.relation).collect();
    for rel in relations {
        let p = predicted.iter().copied().filter(|t| t.relation == rel).collect();
        let g = gold.iter().copied().filter(|t| t.relation == rel).collect();
        let (tp, fp, fn_) = counts(&p, &g);
        overall.per_relation.insert(rel, Metrics::from_counts(tp, fp, fn_));
    }
    overall
}

fn normalize_name(s: &str) -> String {
    let s = s.trim().trim_matches('`').trim();
    let s = match s.find('(') {
        Some(i) if s.ends_with(')') => &s[..i],
        _ => s,
    };
    s.split_whitespace().collect()
}

/// Share of gold names found among the predictions. Comparison ignores
/// whitespace, backticks and call suffixes but not case.
pub fn score_unit_accuracy(predicted: &[String], gold: &[String]) -> Result<f64, EvalError> {
    let gold: BTreeSet<String> = gold.iter().map(|s| normalize_name(s)).filter(|s| !s.is_empty()).collect();
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let predicted: BTreeSet<String> = predicted.iter().map(|s| normalize_name(s)).collect();
    Ok(gold.intersection(&predicted).count() as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: Metrics,
    pub per_relation: BTreeMap<RelationType, Metrics>,
    pub per_unit_accuracy: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn new(mut overall: Metrics, per_unit_accuracy: BTreeMap<String, f64>) -> Self {
        let per_relation = std::mem::take(&mut overall.per_relation);
        EvalReport {
            overall,
            per_relation,
            per_unit_accuracy,
        }
    }

    /// Plain-text table, two decimals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>5} {:>5} {:>9} {:>7} {:>5}",
            "relation", "tp", "fp", "fn", "precision", "recall", "f1"
        );
        let rows = self
            .per_relation
            .iter()
            .map(|(r, m)| (r.slug(), m))
            .chain(std::iter::once(("overall", &self.overall)));
        for (name, m) in rows {
            let _ = writeln!(
                out,
                "{:<24} {:>5} {:>5} {:>5} {:>9.2} {:>7.2} {:>5.2}",
                name, m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
            );
        }
        for (unit, acc) in &self.per_unit_accuracy {
            let _ = writeln!(out, "accuracy[{unit}] {acc:.2}");
        }
        out
    }
}

/// Gold triples for all records.
pub fn gold_triples(records: &[GoldRecord]) -> Vec<Triple> {
    records.iter().flat_map(GoldRecord::triples).collect()
}

/// Holding prediction rows as triples, restricted to ids present in `gold`.
pub fn predicted_triples(rows: &[PredictionRow], records: &[GoldRecord]) -> Vec<Triple> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    rows.iter()
        .filter(|r| r.holds && ids.contains(r.id.as_str()))
        .filter_map(|r| r.triple().ok())
        .collect()
}

/// FQN accuracy pooled over records: gold FQNs matched by the parser output
/// for the same id.
pub fn fqn_accuracy(parsed: &BTreeMap<String, Vec<String>>, records: &[GoldRecord]) -> Result<f64, EvalError> {
    let tag = |id: &str, name: &str| format!("{id}\u{0}{name}");
    let gold: Vec<String> = records
        .iter()
        .flat_map(|r| r.apis.iter().map(move |a| tag(&r.id, &a.fqn.normalized())))
        .collect();
    let predicted: Vec<String> = parsed
        .iter()
        .flat_map(|(id, names)| names.iter().map(move |n| tag(id, &normalize_fqn(n).map(|f| f.normalized()).unwrap_or_default())))
        .collect();
    score_unit_accuracy(&predicted, &gold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(id: &str, a: &str, b: &str, rel: RelationType) -> Triple {
        Triple {
            id: id.into(),
            pair: make_pair(normalize_fqn(a).unwrap(), normalize_fqn(b).unwrap()).unwrap(),
            relation: rel,
        }
    }

    #[test]
    fn two_of_three() {
        use RelationType::*;
        let t1 = t("1", "a.A", "a.B", FunctionSimilarity);
        let t2 = t("1", "a.A", "a.C", BehaviorDifference);
        let t3 = t("2", "a.A", "a.B", FunctionReplace);
        let t4 = t("2", "a.B", "a.C", TypeConversion);
        let m = score_relations(&[t1.clone(), t2.clone(), t3], &[t1, t2, t4]);
        assert_eq!((m.tp, m.fp, m.fn_), (2, 1, 1));
        assert_eq!(m.precision, 2.0 / 3.0);
        assert_eq!(m.recall, 2.0 / 3.0);
        assert_eq!(m.f1, 2.0 / 3.0);
        assert_eq!(m.per_relation[&FunctionReplace].precision, 0.0);
        assert_eq!(m.per_relation[&TypeConversion].recall, 0.0);
    }

    #[test]
    fn degenerate_cases() {
        let g = vec![t("1", "a.A", "a.B", RelationType::FunctionSimilarity)];
        let perfect = score_relations(&g, &g);
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        let none = score_relations(&[], &g);
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        let empty = score_relations(&[], &[]);
        assert_eq!(empty.f1, 0.0);
    }

    #[test]
    fn endpoint_order_does_not_matter() {
        let a = t("1", "a.A", "a.B", RelationType::FunctionSimilarity);
        let b = t("1", "a.B", "a.A", RelationType::FunctionSimilarity);
        assert_eq!(score_relations(&[a], &[b]).f1, 1.0);
    }

    #[test]
    fn unit_accuracy() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(score_unit_accuracy(&s(&["A", "B"]), &s(&["A", "B"])).unwrap(), 1.0);
        let gold = s(&["String", "StringBuffer", "List", "Map", "Scanner.next"]);
        let pred = s(&["`String`", " StringBuffer", "List", "Scanner.next()", "Set"]);
        assert_eq!(score_unit_accuracy(&pred, &gold).unwrap(), 0.8);
        assert_eq!(score_unit_accuracy(&s(&["string"]), &s(&["String"])).unwrap(), 0.0);
        assert_eq!(score_unit_accuracy(&pred, &[]), Err(EvalError::EmptyGold));
    }

    fn write(lines: &[&str]) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    const REC: &str = r#"{"id":"r1","text":"t","apis":[{"mention":"A","fqn":"a.A"},{"mention":"B","fqn":"a.B"}],"relations":[{"api1":"a.B","api2":"a.A","type":"function similarity"}]}"#;

    #[test]
    fn loads_and_canonicalizes() {
        let f = write(&[REC, "", &REC.replace("r1", "r2"), &REC.replace("r1", "r3")]);
        let (records, warnings) = load_dataset(f.path()).unwrap();
        assert_eq!(records.len(), 3);
        assert!(warnings.is_empty());
        assert_eq!(records[0].relations[0].api1.normalized(), "a.A");
    }

    #[test]
    fn foreign_endpoint_names_record() {
        let bad = REC.replace(r#""api1":"a.B""#, r#""api1":"a.Z""#);
        let f = write(&[REC.replace("r1", "r0").as_str(), &bad]);
        let err = load_dataset(f.path()).unwrap_err();
        let EvalError::Schema { line, reason, .. } = err else { panic!() };
        assert_eq!(line, 2);
        assert!(reason.contains("\"r1\""));
    }

    #[test]
    fn duplicates_dropped_with_warning() {
        let dup = REC.replace(
            r#""type":"function similarity"}]"#,
            r#""type":"function similarity"},{"api1":"a.A","api2":"a.B","type":"function-similarity"}]"#,
        );
        let f = write(&[&dup]);
        let (records, warnings) = load_dataset(f.path()).unwrap();
        assert_eq!(records[0].relations.len(), 1);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn malformed_line_is_located() {
        let f = write(&[REC, "{not json"]);
        assert!(matches!(load_dataset(f.path()), Err(EvalError::Schema { line: 2, .. })));
    }

    #[test]
    fn table_rounds_to_two_places() {
        let m = Metrics::from_counts(2, 1, 1);
        let table = EvalReport::new(m, BTreeMap::new()).table();
        assert!(table.lines().last().unwrap().ends_with("0.67    0.67  0.67"), "{table}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn f1_identity(tp in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000) {
            let m = Metrics::from_counts(tp, fp, fn_);
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((m.f1 - f).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }

        #[test]
        fn symmetric_under_permutation(n in 1usize..20, k in 0usize..20) {
            let rels = RelationType::ALL;
            let all: Vec<Triple> = (0..n)
                .map(|i| t("x", &format!("a.A{i}"), &format!("a.B{i}"), rels[i % 7]))
                .collect();
            let pred: Vec<Triple> = all.iter().take(k.min(n)).cloned().collect();
            let mut rev = pred.clone();
            rev.reverse();
            prop_assert_eq!(score_relations(&pred, &all), score_relations(&rev, &all));
            prop_assert_eq!(score_relations(&all, &all).f1, 1.0);
        }
    }
}
