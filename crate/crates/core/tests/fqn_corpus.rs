use apichain::parser::extract_fqns;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    text: String,
    expected: Vec<String>,
}

#[test]
fn pattern_extraction_matches_annotations() {
    let raw = include_str!("data/fqn_corpus.json");
    let cases: Vec<Case> = serde_json::from_str(raw).unwrap();
    assert_eq!(cases.len(), 30);
    let mut misses = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let got: Vec<String> = extract_fqns(&case.text).iter().map(|f| f.normalized()).collect();
        if got != case.expected {
            misses.push(format!("#{i}: expected {:?}, got {:?}", case.expected, got));
        }
    }
    assert!(misses.is_empty(), "{}", misses.join("\n"));
}
