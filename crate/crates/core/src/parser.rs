//! API mention parsing: pattern-based FQN extraction, model-backed Non-FQN
//! extraction and FQN inference, and pair generation.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Complete, GatewayError};
use crate::model::{is_identifier, make_pair, normalize_fqn, ApiMention, ApiPair, Fqn, MentionKind, Warning};
use crate::prompting::{parse_list_answer, render, units, PromptCatalog, PromptError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

static DOTTED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z_$][A-Za-z0-9_$]*(?:\.[A-Za-z_$][A-Za-z0-9_$]*)+(\([^()\n]*\))?").unwrap()
});

/// Result of parsing one text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedText {
    pub source_id: String,
    pub text: String,
    pub fqns: Vec<Fqn>,
    /// Names returned by the Non-FQN unit, before inference.
    pub non_fqns: Vec<String>,
    pub mentions: Vec<ApiMention>,
    pub pairs: Vec<ApiPair>,
    #[serde(default)]
    pub warnings: Vec<Warning>,
}

fn looks_like_api(fqn: &Fqn) -> bool {
    let segs = fqn.segments();
    // Abbreviations such as "U.S.A" or "I.e".
    if segs.iter().all(|s| s.chars().count() == 1) {
        return false;
    }
    fqn.has_call_suffix() || segs.iter().any(|s| s.starts_with(|c: char| c.is_ascii_uppercase()))
}

/// Every dotted-name match with its mention record, in text order, duplicates
/// included.
pub fn extract_fqn_mentions(text: &str) -> Vec<(Fqn, ApiMention)> {
    let mut out = Vec::new();
    for m in DOTTED.find_iter(text) {
        let prev = text[..m.start()].chars().next_back();
        if prev.is_some_and(|c| c == '.' || c == '#' || c.is_ascii_alphanumeric() || c == '_' || c == '$') {
            continue;
        }
        let Ok(fqn) = normalize_fqn(m.as_str()) else {
            continue;
        };
        if !looks_like_api(&fqn) {
            continue;
        }
        let mention = ApiMention {
            surface: m.as_str().to_string(),
            span: (m.start(), m.end()),
            kind: MentionKind::Fqn,
        };
        out.push((fqn, mention));
    }
    out
}

/// Dotted names with at least one capitalized segment or a call suffix,
/// deduplicated in first-occurrence order.
pub fn extract_fqns(text: &str) -> Vec<Fqn> {
    dedup(extract_fqn_mentions(text).into_iter().map(|(f, _)| f))
}

fn dedup(fqns: impl IntoIterator<Item = Fqn>) -> Vec<Fqn> {
    let mut seen = BTreeSet::new();
    fqns.into_iter().filter(|f| seen.insert(f.clone())).collect()
}

/// Asks the Non-FQN unit for simple and partially qualified names, dropping
/// anything the pattern extractor already found.
pub fn extract_non_fqns(text: &str, catalog: &PromptCatalog, gateway: &dyn Complete) -> Result<Vec<String>, ParseError> {
    let prompt = render(catalog.get(units::NON_FQN)?, &[("TEXT", text)])?;
    let answer = gateway.ask(&prompt)?;
    let found = extract_fqns(text);
    Ok(parse_list_answer(&answer.text)
        .into_iter()
        .filter(|name| !normalize_fqn(name).is_ok_and(|f| found.contains(&f)))
        .collect())
}

/// A lowercase package prefix followed by a capitalized segment, e.g. `java.util.List`.
fn is_package_qualified(name: &str) -> bool {
    normalize_fqn(name).is_ok_and(|f| {
        let segs = f.segments();
        segs[0].starts_with(|c: char| c.is_ascii_lowercase())
            && segs.iter().skip(1).any(|s| s.starts_with(|c: char| c.is_ascii_uppercase()))
    })
}

/// Resolves names to FQNs with one model call per text. Names that are
/// already package-qualified pass through unchanged; answers that do not
/// normalize are dropped with a warning.
pub fn infer_fqns(
    text: &str,
    names: &[String],
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Result<(Vec<Fqn>, Vec<Warning>), ParseError> {
    let (qualified, unresolved): (Vec<&String>, Vec<&String>) = names.iter().partition(|n| is_package_qualified(n));
    let mut fqns: Vec<Fqn> = qualified.iter().filter_map(|n| normalize_fqn(n).ok()).collect();
    let mut warnings = Vec::new();
    if !unresolved.is_empty() {
        let joined = unresolved.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
        let prompt = render(catalog.get(units::FQN_INFERENCE)?, &[("TEXT", text), ("NAMES", &joined)])?;
        let answer = gateway.ask(&prompt)?;
        for item in parse_list_answer(&answer.text) {
            match normalize_fqn(&item) {
                Ok(f) => fqns.push(f),
                Err(e) => {
                    log::warn!("dropping inferred name: {e}");
                    warnings.push(Warning::new(units::FQN_INFERENCE, e.to_string()));
                }
            }
        }
    }
    Ok((dedup(fqns), warnings))
}

/// All 2-combinations of the distinct FQNs, canonicalized and sorted.
pub fn generate_pairs(fqns: &[Fqn]) -> Vec<ApiPair> {
    let distinct: Vec<Fqn> = fqns.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut pairs = Vec::with_capacity(distinct.len() * distinct.len().saturating_sub(1) / 2);
    for (i, a) in distinct.iter().enumerate() {
        for b in &distinct[i + 1..] {
            pairs.push(make_pair(a.clone(), b.clone()).expect("distinct FQNs"));
        }
    }
    pairs.sort();
    pairs
}

/// `Scanner.nextLine` abbreviates `java.util.Scanner.nextLine` when both occur.
fn is_abbreviation(fqn: &Fqn, all: &[Fqn]) -> bool {
    let short = fqn.segments();
    all.iter().any(|other| {
        let long = other.segments();
        long.len() > short.len() && long.ends_with(&short)
    })
}

fn locate(text: &str, name: &str) -> Option<ApiMention> {
    let start = text.find(name)?;
    let body = name.split('(').next().unwrap_or(name);
    let kind = if body.contains('.') {
        MentionKind::PartiallyQualified
    } else if is_identifier(body) {
        MentionKind::SimpleName
    } else {
        return None;
    };
    Some(ApiMention {
        surface: name.to_string(),
        span: (start, start + name.len()),
        kind,
    })
}

/// Full parser flow for one text.
pub fn parse(
    source_id: &str,
    text: &str,
    catalog: &PromptCatalog,
    gateway: &dyn Complete,
) -> Result<ParsedText, ParseError> {
    if text.trim().is_empty() {
        return Ok(ParsedText {
            source_id: source_id.to_string(),
            text: text.to_string(),
            fqns: Vec::new(),
            non_fqns: Vec::new(),
            mentions: Vec::new(),
            pairs: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let (pattern, non_fqns) = std::thread::scope(|s| {
        let model_branch = s.spawn(|| extract_non_fqns(text, catalog, gateway));
        let pattern = extract_fqn_mentions(text);
        (pattern, model_branch.join().expect("non-FQN extraction panicked"))
    });
    let non_fqns = non_fqns?;
    let (inferred, warnings) = if non_fqns.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        infer_fqns(text, &non_fqns, catalog, gateway)?
    };
    let all = dedup(pattern.iter().map(|(f, _)| f.clone()).chain(inferred));
    let fqns: Vec<Fqn> = all.iter().filter(|f| !is_abbreviation(f, &all)).cloned().collect();
    let mut mentions: Vec<ApiMention> = pattern
        .into_iter()
        .map(|(f, mut m)| {
            if !fqns.contains(&f) {
                m.kind = MentionKind::PartiallyQualified;
            }
            m
        })
        .collect();
    mentions.extend(non_fqns.iter().filter_map(|n| locate(text, n)));
    mentions.sort_by_key(|m| m.span);
    let pairs = generate_pairs(&fqns);
    Ok(ParsedText {
        source_id: source_id.to_string(),
        text: text.to_string(),
        fqns,
        non_fqns,
        mentions,
        pairs,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, MockRule, MockScript, ScriptedBackend};
    use std::sync::Arc;

    fn fqn(s: &str) -> Fqn {
        normalize_fqn(s).unwrap()
    }

    fn names(v: &[Fqn]) -> Vec<String> {
        v.iter().map(Fqn::normalized).collect()
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(names(&extract_fqns("Use java.lang.String here.")), ["java.lang.String"]);
        assert!(extract_fqns("this text mentions no apis at all").is_empty());
        assert_eq!(
            names(&extract_fqns("call java.util.Scanner.nextInt and check e.g. the docs")),
            ["java.util.Scanner.nextInt"]
        );
    }

    #[test]
    fn mention_spans_point_into_text() {
        let text = "Wrap `java.io.FileReader` in java.io.BufferedReader(reader).";
        for (_, m) in extract_fqn_mentions(text) {
            assert_eq!(&text[m.span.0..m.span.1], m.surface);
        }
    }

    #[test]
    fn pairs_from_three() {
        let (a, b, c) = (fqn("p.A"), fqn("p.B"), fqn("p.C"));
        let pairs = generate_pairs(&[c.clone(), a.clone(), b.clone()]);
        assert_eq!(
            pairs,
            vec![
                make_pair(a.clone(), b.clone()).unwrap(),
                make_pair(a, c.clone()).unwrap(),
                make_pair(b, c).unwrap()
            ]
        );
        assert!(generate_pairs(&[fqn("p.A")]).is_empty());
        assert!(generate_pairs(&[fqn("p.A"), fqn("p.A()")]).is_empty());
    }

    #[test]
    fn five_apis_make_ten_pairs() {
        let apis: Vec<Fqn> = ["p.A", "p.B", "p.C", "p.D", "p.E"].iter().map(|s| fqn(s)).collect();
        let mut brute = Vec::new();
        for i in 0..apis.len() {
            for j in i + 1..apis.len() {
                brute.push(make_pair(apis[i].clone(), apis[j].clone()).unwrap());
            }
        }
        brute.sort();
        assert_eq!(generate_pairs(&apis), brute);
        assert_eq!(brute.len(), 10);
    }

    fn scripted(rules: &[(&[&str], &str)]) -> Arc<ScriptedBackend> {
        Arc::new(ScriptedBackend::new(MockScript {
            rules: rules
                .iter()
                .map(|(c, r)| MockRule {
                    contains: c.iter().map(|s| s.to_string()).collect(),
                    reply: r.to_string(),
                    fail: false,
                })
                .collect(),
            default: None,
            match_whole_prompt: false,
        }))
    }

    #[test]
    fn non_fqn_sentinel() {
        let gw = Gateway::new(scripted(&[(&["Non-FQNs:"], "none")]));
        assert!(extract_non_fqns("plain words", &PromptCatalog::bundled(), &gw).unwrap().is_empty());
    }

    #[test]
    fn non_fqns_skip_pattern_matches() {
        let gw = Gateway::new(scripted(&[(&["Non-FQNs:"], "java.lang.String, StringBuffer")]));
        let got = extract_non_fqns("java.lang.String and StringBuffer", &PromptCatalog::bundled(), &gw).unwrap();
        assert_eq!(got, ["StringBuffer"]);
    }

    #[test]
    fn inference_drops_unqualifiable() {
        let backend = scripted(&[(&["FQNs:"], "java.lang.StringBuffer, String")]);
        let gw = Gateway::new(backend.clone());
        let (fqns, warnings) = infer_fqns(
            "text",
            &["StringBuffer".into(), "String".into()],
            &PromptCatalog::bundled(),
            &gw,
        )
        .unwrap();
        assert_eq!(names(&fqns), ["java.lang.StringBuffer"]);
        assert_eq!(warnings.len(), 1);
        assert_eq!(backend.call_count(), 1);
    }

    #[test]
    fn qualified_names_pass_through() {
        let backend = scripted(&[]);
        let gw = Gateway::new(backend.clone());
        let (fqns, _) = infer_fqns("t", &["java.util.List".into()], &PromptCatalog::bundled(), &gw).unwrap();
        assert_eq!(names(&fqns), ["java.util.List"]);
        assert_eq!(backend.call_count(), 0);
    }

    #[test]
    fn empty_text_parses_to_nothing() {
        let backend = scripted(&[]);
        let gw = Gateway::new(backend.clone());
        let p = parse("t0", "", &PromptCatalog::bundled(), &gw).unwrap();
        assert!(p.fqns.is_empty() && p.pairs.is_empty() && p.mentions.is_empty());
        assert_eq!(backend.call_count(), 0);
    }

    #[test]
    fn union_dedups_on_normalized_form() {
        let gw = Gateway::new(scripted(&[
            (&["FQNs:", "Non-FQNs: Scanner"], "java.util.Scanner.nextLine()"),
            (&["Non-FQNs:"], "Scanner.nextLine"),
        ]));
        let text = "Call java.util.Scanner.nextLine after nextInt; Scanner.nextLine then returns the rest.";
        let p = parse("t1", text, &PromptCatalog::bundled(), &gw).unwrap();
        assert_eq!(names(&p.fqns), ["java.util.Scanner.nextLine"]);
        assert!(p.pairs.is_empty());
        assert!(p.mentions.iter().any(|m| m.kind == MentionKind::PartiallyQualified));
    }

    #[test]
    fn gateway_failure_aborts_parse() {
        let gw = Gateway::new(scripted(&[]));
        assert!(matches!(
            parse("t", "StringBuffer text", &PromptCatalog::bundled(), &gw),
            Err(ParseError::Gateway(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn api_set() -> impl Strategy<Value = Vec<Fqn>> {
            prop::collection::btree_set("[a-z]{1,4}\\.[A-Z][a-z]{0,5}", 0..50)
                .prop_map(|s| s.into_iter().map(|n| normalize_fqn(&n).unwrap()).collect())
        }

        proptest! {
            #[test]
            fn pair_count_and_permutation(apis in api_set(), seed in any::<u64>()) {
                let n = apis.len();
                let pairs = generate_pairs(&apis);
                prop_assert_eq!(pairs.len(), n * n.saturating_sub(1) / 2);
                let mut shuffled = apis.clone();
                let len = shuffled.len();
                if len > 1 {
                    shuffled.rotate_left((seed as usize) % len);
                    shuffled.reverse();
                }
                prop_assert_eq!(generate_pairs(&shuffled), pairs.clone());
                for api in &apis {
                    prop_assert_eq!(pairs.iter().filter(|p| p.contains(api)).count(), n - 1);
                }
            }

            #[test]
            fn extracted_spans_exist(text in "[ a-zA-Z.()`,]{0,80}") {
                for (_, m) in extract_fqn_mentions(&text) {
                    prop_assert_eq!(&text[m.span.0..m.span.1], m.surface.as_str());
                }
            }
        }
    }
}
