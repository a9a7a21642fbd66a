//! Total parsers from raw model text to structured answers.

use crate::model::{fold_relation_text, Answer, RelationType};

/// Result of the multiple-choice unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChoiceAnswer {
    Relation(RelationType),
    Unknown,
}

/// Splits on top-level commas, semicolons and newlines.
fn split_items(raw: &str) -> Vec<&str> {
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in raw.char_indices() {
        match c {
            '(' | '<' | '[' => depth += 1,
            ')' | '>' | ']' => depth = (depth - 1).max(0),
            ',' | ';' | '\n' if depth == 0 => {
                items.push(&raw[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    items.push(&raw[start..]);
    items
}

fn is_none_sentinel(s: &str) -> bool {
    let t = s.trim().trim_end_matches('.').trim().to_ascii_lowercase();
    t == "none" || t == "n/a"
}

/// Parses a list answer such as `"Scanner.nextLine, Scanner.next()"`.
///
/// Items are trimmed of whitespace, backticks and list bullets; empties and
/// repeats are dropped keeping first-occurrence order. `none` / `N/A` yield
/// the empty list.
pub fn parse_list_answer(raw: &str) -> Vec<String> {
    if is_none_sentinel(raw) {
        return Vec::new();
    }
    let mut out: Vec<String> = Vec::new();
    for item in split_items(raw) {
        let mut s = item.trim();
        s = s.trim_start_matches(['-', '*', '•']).trim();
        // "1. Foo" / "2) Foo"
        if let Some(idx) = s.find(['.', ')']) {
            if idx > 0 && s[..idx].chars().all(|c| c.is_ascii_digit()) && s[idx + 1..].starts_with(' ') {
                s = s[idx + 1..].trim();
            }
        }
        let s = s.trim_matches(|c: char| c == '`' || c.is_whitespace());
        if s.is_empty() || is_none_sentinel(s) {
            continue;
        }
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

/// Leading-token match on `yes` / `no`; anything else abstains.
pub fn parse_yes_no(raw: &str) -> Answer {
    let token: String = raw
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match token.as_str() {
        "yes" => Answer::Yes,
        "no" => Answer::No,
        _ => Answer::Abstain,
    }
}

/// `incorrect` (and `not correct`) map to No before `correct` maps to Yes.
pub fn parse_statement_answer(raw: &str) -> Answer {
    let lower = raw.to_lowercase();
    if lower.contains("incorrect") || lower.contains("not correct") {
        Answer::No
    } else if lower.contains("correct") {
        Answer::Yes
    } else {
        Answer::Abstain
    }
}

/// Letter of the `unknown` option in the multiple-choice prompt.
pub(crate) const UNKNOWN_LETTER: char = 'H';

pub(crate) fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// Scans for the first option (in `options` order) whose name occurs in the
/// answer, ignoring case and hyphens. A bare option letter (`"C"`, `"C."`)
/// also selects that option of the full seven-way list.
pub fn parse_choice_answer(raw: &str, options: &[RelationType]) -> ChoiceAnswer {
    let trimmed = raw.trim().trim_start_matches('(').trim_end_matches(['.', ')', ':']).trim();
    if trimmed.len() == 1 {
        let letter = trimmed.chars().next().unwrap().to_ascii_uppercase();
        if let Some(r) = RelationType::ALL
            .iter()
            .enumerate()
            .find(|(i, _)| option_letter(*i) == letter)
            .map(|(_, r)| *r)
            .filter(|r| options.contains(r))
        {
            return ChoiceAnswer::Relation(r);
        }
        return ChoiceAnswer::Unknown;
    }
    let folded = fold_relation_text(raw);
    options
        .iter()
        .find(|r| folded.contains(r.display_name()))
        .map_or(ChoiceAnswer::Unknown, |r| ChoiceAnswer::Relation(*r))
}
