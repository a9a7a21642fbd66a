use apichain::decider::{aggregate, majority};
use apichain::model::{make_pair, normalize_fqn, Answer, DeciderStyle, RelationType, UnitVote};
use apichain::prompting::{parse_choice_answer, parse_list_answer, parse_statement_answer, parse_yes_no, ChoiceAnswer};
use serde::Deserialize;

#[derive(Deserialize)]
struct Labeled<T> {
    raw: String,
    expected: T,
}

fn load<T: serde::de::DeserializeOwned>(name: &str) -> Vec<Labeled<T>> {
    let path = format!("{}/tests/data/answers/{name}", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn answer(label: &str) -> Answer {
    match label {
        "yes" => Answer::Yes,
        "no" => Answer::No,
        _ => Answer::Abstain,
    }
}

#[test]
fn yes_no_fixture() {
    let cases = load::<String>("yes_no.json");
    assert_eq!(cases.len(), 20);
    for c in cases {
        assert_eq!(parse_yes_no(&c.raw), answer(&c.expected), "{:?}", c.raw);
    }
}

#[test]
fn statement_fixture() {
    let cases = load::<String>("statement.json");
    assert_eq!(cases.len(), 20);
    for c in cases {
        assert_eq!(parse_statement_answer(&c.raw), answer(&c.expected), "{:?}", c.raw);
    }
}

#[test]
fn choice_fixture() {
    let cases = load::<String>("choice.json");
    assert_eq!(cases.len(), 20);
    for c in cases {
        let expected = match c.expected.as_str() {
            "unknown" => ChoiceAnswer::Unknown,
            slug => ChoiceAnswer::Relation(slug.parse().unwrap()),
        };
        assert_eq!(parse_choice_answer(&c.raw, &RelationType::ALL), expected, "{:?}", c.raw);
    }
}

#[test]
fn list_fixture() {
    let cases = load::<Vec<String>>("list.json");
    assert_eq!(cases.len(), 15);
    for c in cases {
        assert_eq!(parse_list_answer(&c.raw), c.expected, "{:?}", c.raw);
    }
}

#[derive(Deserialize)]
struct VoteRow {
    votes: Vec<String>,
    holds: bool,
}

#[test]
fn vote_truth_table() {
    let rows: Vec<VoteRow> = load_rows();
    assert_eq!(rows.len(), 27);
    let pair = make_pair(normalize_fqn("a.A").unwrap(), normalize_fqn("a.B").unwrap()).unwrap();
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for row in rows {
        let answers: Vec<Answer> = row.votes.iter().map(|v| answer(v)).collect();
        for order in orders {
            let permuted: Vec<Answer> = order.iter().map(|&i| answers[i]).collect();
            assert_eq!(majority(&permuted), row.holds, "{:?}", row.votes);
            let votes = permuted
                .iter()
                .zip(DeciderStyle::ALL)
                .map(|(a, s)| UnitVote::new(s, RelationType::FunctionReplace, *a, ""))
                .collect();
            assert_eq!(aggregate(&pair, votes).unwrap().holds, row.holds);
        }
    }
}

fn load_rows() -> Vec<VoteRow> {
    let path = format!("{}/tests/data/answers/votes.json", env!("CARGO_MANIFEST_DIR"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
