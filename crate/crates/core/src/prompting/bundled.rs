//! Default templates for every unit, with hand-written few-shot examples.

use super::answers::{option_letter, UNKNOWN_LETTER};
use super::catalog::units;
use super::{FewShotExample, PromptTemplate};
use crate::decider::{statement_claim, yes_no_question};
use crate::knowledge::{knowledge_label, mining_question};
use crate::model::{KnowledgeKind, RelationType};

pub const NON_FQN_INPUT: &str = "Natural language text: {{TEXT}}\nNon-FQNs:";
pub const FQN_INFERENCE_INPUT: &str = "Natural language text: {{TEXT}}\nNon-FQNs: {{NAMES}}\nFQNs:";

fn fill(template: &str, bindings: &[(&str, &str)]) -> String {
    bindings
        .iter()
        .fold(template.to_string(), |acc, (slot, value)| acc.replace(&format!("{{{{{slot}}}}}"), value))
}

fn build(unit: String, description: String, examples: Vec<FewShotExample>, input: String, slots: &[&str]) -> PromptTemplate {
    PromptTemplate::new(unit, description, examples, input, slots).expect("bundled template is valid")
}

fn non_fqn() -> PromptTemplate {
    let cases = [
        (
            "java.util.Scanner.nextInt() leaves the newline in the buffer, so a following Scanner.nextLine returns an empty string; call Scanner.next() or nextLine once more to consume it.",
            "Scanner.nextLine, Scanner.next()",
        ),
        (
            "Use an ArrayList if you mostly read by index. A LinkedList only pays off when you insert in the middle a lot.",
            "ArrayList, LinkedList",
        ),
        (
            "You can open the stream with java.io.FileInputStream and wrap it in java.io.BufferedInputStream.",
            "none",
        ),
        (
            "HashMap.get returns null for a missing key, while Optional.ofNullable(map.get(k)) makes that explicit.",
            "HashMap.get, Optional.ofNullable",
        ),
    ];
    let examples = cases
        .iter()
        .map(|(text, out)| FewShotExample::new(fill(NON_FQN_INPUT, &[("TEXT", text)]), *out))
        .collect();
    build(
        units::NON_FQN.into(),
        "Extract the Non-FQNs of APIs mentioned in the natural language text. A Non-FQN is a simple name \
         (e.g. String) or a partially qualified name (e.g. Scanner.next()). Do not list fully qualified \
         names. Answer with a comma-separated list in order of appearance, or \"none\"."
            .into(),
        examples,
        NON_FQN_INPUT.into(),
        &["TEXT"],
    )
}

fn fqn_inference() -> PromptTemplate {
    let cases = [
        (
            "java.util.Scanner.nextInt() leaves the newline in the buffer, so a following Scanner.nextLine returns an empty string.",
            "Scanner.nextLine",
            "java.util.Scanner.nextLine",
        ),
        (
            "Use an ArrayList if you mostly read by index. A LinkedList only pays off when you insert in the middle a lot.",
            "ArrayList, LinkedList",
            "java.util.ArrayList, java.util.LinkedList",
        ),
        (
            "A List keeps insertion order whereas a Set rejects duplicates.",
            "List, Set",
            "java.util.List, java.util.Set",
        ),
        (
            "Before running a query you need a Connection from DriverManager.getConnection().",
            "Connection, DriverManager.getConnection()",
            "java.sql.Connection, java.sql.DriverManager.getConnection()",
        ),
    ];
    let examples = cases
        .iter()
        .map(|(text, names, out)| {
            FewShotExample::new(fill(FQN_INFERENCE_INPUT, &[("TEXT", text), ("NAMES", names)]), *out)
        })
        .collect();
    build(
        units::FQN_INFERENCE.into(),
        "Parse Non-fully qualified names of APIs into fully qualified names (FQNs). Use the natural language \
         text as context to pick the right library. Answer with one FQN per Non-FQN, comma-separated, in the \
         same order."
            .into(),
        examples,
        FQN_INFERENCE_INPUT.into(),
        &["TEXT", "NAMES"],
    )
}

fn mining_examples(kind: KnowledgeKind) -> [(&'static str, &'static str); 4] {
    match kind {
        KnowledgeKind::Usage => [
            ("java.util.ArrayList", "java.util.ArrayList is used to store an ordered, resizable list of elements with fast access by index."),
            ("java.io.FileReader", "java.io.FileReader is used to read character files using the platform default encoding."),
            ("java.sql.Connection", "java.sql.Connection is used to hold a session with a database, through which statements are created and transactions are managed."),
            ("java.util.HashSet", "java.util.HashSet is used to store unique elements without any ordering guarantee."),
        ],
        KnowledgeKind::Characteristics => [
            ("java.util.Hashtable", "java.util.Hashtable is synchronized, does not allow null keys or values, and is considered a legacy class."),
            ("java.time.LocalTime", "java.time.LocalTime is immutable and thread-safe, and represents only a time of day without a date or time zone."),
            ("java.util.LinkedList", "java.util.LinkedList is a doubly linked list that implements both List and Deque and is not synchronized."),
            ("java.io.File", "java.io.File is an abstract representation of a file or directory path and does not hold file contents."),
        ],
        KnowledgeKind::Performance => [
            ("java.util.ArrayList", "java.util.ArrayList gives O(1) random access, while inserting or removing in the middle costs O(n)."),
            ("java.util.TreeMap", "java.util.TreeMap performs get, put and remove in O(log n) because it is backed by a red-black tree."),
            ("java.io.FileReader", "java.io.FileReader reads one character per call, which is slow unless it is wrapped in a BufferedReader."),
            ("java.util.HashSet", "java.util.HashSet offers constant-time add, remove and contains on average."),
        ],
        KnowledgeKind::Condition => [
            ("java.sql.Statement", "Before using java.sql.Statement, a java.sql.Connection must be open; after use, the statement should be closed."),
            ("java.io.FileInputStream", "Before using java.io.FileInputStream the file must exist and be readable; afterwards close() must be called to release the handle."),
            ("java.util.Iterator", "Before calling next() on java.util.Iterator, hasNext() should be checked; remove() may only be called after next()."),
            ("java.lang.Math", "java.lang.Math has only static methods, so nothing needs to be done before or after using it."),
        ],
        KnowledgeKind::UsageScenario => [
            ("java.util.Vector", "Use java.util.Vector only when legacy code requires it; do not use it in new code, where ArrayList or a concurrent collection is preferred."),
            ("java.sql.Statement.executeQuery", "Use java.sql.Statement.executeQuery for SELECT statements that return a ResultSet; do not use it for updates."),
            ("java.util.Date", "Use java.util.Date only to interoperate with old APIs; do not use it for new date arithmetic, where java.time is better."),
            ("java.lang.Thread", "Use java.lang.Thread when you need direct control of a thread; do not use it for pooled tasks, where an ExecutorService fits better."),
        ],
        KnowledgeKind::TaskScenario => [
            ("java.io.InputStream", "java.io.InputStream can accomplish reading bytes from files, sockets and other sources, for example when copying a file."),
            ("java.sql.Connection", "java.sql.Connection can accomplish opening database sessions, creating statements and committing transactions."),
            ("java.util.Collections", "java.util.Collections can accomplish sorting, shuffling and wrapping collections as unmodifiable or synchronized views."),
            ("java.lang.Math", "java.lang.Math can accomplish numeric tasks such as rounding, trigonometry and exponentiation."),
        ],
        KnowledgeKind::TypeInfo => [
            ("java.util.stream.Stream", "java.util.stream.Stream can be converted to a java.util.List, a java.util.Set, an array or a java.util.Map through collectors."),
            ("java.lang.Integer", "java.lang.Integer can be converted to int, long, double and to java.lang.String through toString or valueOf."),
            ("java.io.File", "java.io.File can be converted to a java.nio.file.Path with toPath() and to a java.net.URI with toURI()."),
            ("java.lang.Thread", "java.lang.Thread is not usually converted to other data types."),
        ],
    }
}

pub(crate) fn mining_input(kind: KnowledgeKind) -> String {
    format!("Question: {}\nAnswer:", mining_question(kind))
}

fn mining(kind: KnowledgeKind) -> PromptTemplate {
    let input = mining_input(kind);
    let examples = mining_examples(kind)
        .iter()
        .map(|(api, answer)| FewShotExample::new(fill(&input, &[("API", api)]), *answer))
        .collect();
    build(
        units::mining(kind),
        format!(
            "Answer the question about the {} of a Java API in two or three factual sentences. \
             Talk only about the API in the question.",
            knowledge_label(kind)
        ),
        examples,
        input,
        &["API"],
    )
}

struct Case {
    api1: &'static str,
    api2: &'static str,
    k1: &'static str,
    k2: &'static str,
    holds: bool,
}

const fn case(api1: &'static str, api2: &'static str, k1: &'static str, k2: &'static str, holds: bool) -> Case {
    Case { api1, api2, k1, k2, holds }
}

fn relation_cases(relation: RelationType) -> [Case; 4] {
    use RelationType::*;
    match relation {
        FunctionSimilarity => [
            case("java.io.File", "java.nio.file.Path", "java.io.File is used to locate files and directories and perform file operations.", "java.nio.file.Path is used to locate a file in the file system and is used with Files for file operations.", true),
            case("java.io.FileReader", "java.util.HashSet", "java.io.FileReader is used to read character files.", "java.util.HashSet is used to store unique elements.", false),
            case("java.util.ArrayList", "java.util.LinkedList", "java.util.ArrayList is used to store an ordered list of elements.", "java.util.LinkedList is used to store an ordered list of elements and to act as a queue.", true),
            case("java.sql.Connection", "java.lang.Math", "java.sql.Connection is used to hold a session with a database.", "java.lang.Math is used for basic numeric operations.", false),
        ],
        BehaviorDifference => [
            case("java.time.LocalDateTime", "java.time.LocalTime", "java.time.LocalDateTime is used to represent a date-time; it stores both date and time.", "java.time.LocalTime is used to represent a time; it stores only a time of day.", true),
            case("java.io.FileReader", "java.util.HashSet", "java.io.FileReader is used to read character files; it reads one character per call.", "java.util.HashSet is used to store unique elements; it is not ordered.", false),
            case("java.util.HashMap", "java.util.Hashtable", "java.util.HashMap is used to map keys to values; it allows null keys and is not synchronized.", "java.util.Hashtable is used to map keys to values; it is synchronized and rejects nulls.", true),
            case("java.lang.Integer", "java.io.File", "java.lang.Integer is used to wrap an int value; it is immutable.", "java.io.File is used to represent a file path; it holds no contents.", false),
        ],
        FunctionReplace => [
            case("java.sql.Statement.executeUpdate", "java.sql.Statement.executeQuery", "Use java.sql.Statement.executeUpdate for INSERT, UPDATE and DELETE statements.", "Use java.sql.Statement.executeQuery only for SELECT statements; do not use it for updates.", true),
            case("java.io.InputStream", "java.io.OutputStream", "Use java.io.InputStream to read bytes.", "Use java.io.OutputStream to write bytes.", false),
            case("java.util.Vector", "java.util.ArrayList", "Use java.util.Vector only for legacy code; do not use it in new code.", "Use java.util.ArrayList for lists in single-threaded code.", true),
            case("java.lang.Thread", "java.util.Scanner", "Use java.lang.Thread to run code concurrently.", "Use java.util.Scanner to parse text input.", false),
        ],
        FunctionCollaboration => [
            case("java.io.InputStream", "java.io.OutputStream", "java.io.InputStream can accomplish reading bytes, e.g. the source side of a file copy.", "java.io.OutputStream can accomplish writing bytes, e.g. the target side of a file copy.", true),
            case("java.util.ArrayList", "java.util.LinkedList", "java.util.ArrayList can accomplish storing ordered elements.", "java.util.LinkedList can accomplish storing ordered elements and queueing.", false),
            case("java.sql.Connection", "java.sql.Statement", "java.sql.Connection can accomplish opening a database session and creating statements.", "java.sql.Statement can accomplish executing SQL on an open connection.", true),
            case("java.lang.Math", "java.io.File", "java.lang.Math can accomplish numeric computations.", "java.io.File can accomplish describing file paths.", false),
        ],
        LogicConstraint => [
            case("java.sql.Connection", "java.sql.Statement", "java.sql.Connection is used to hold a database session; it must be opened before statements are created.", "java.sql.Statement is used to execute SQL; a Connection must be open before using it.", true),
            case("java.util.ArrayList", "java.util.LinkedList", "java.util.ArrayList is used to store a list; nothing is required before using it.", "java.util.LinkedList is used to store a list; nothing is required before using it.", false),
            case("java.util.Iterator.hasNext", "java.util.Iterator.next", "java.util.Iterator.hasNext is used to test for more elements; it should be called before next().", "java.util.Iterator.next is used to get the next element; hasNext() should be checked first.", true),
            case("java.lang.Math", "java.lang.String", "java.lang.Math is used for numeric operations; nothing is required before using it.", "java.lang.String is used to hold text; nothing is required before using it.", false),
        ],
        EfficiencyComparison => [
            case("java.util.ArrayList", "java.util.LinkedList", "java.util.ArrayList is used to store a list; random access is O(1).", "java.util.LinkedList is used to store a list; random access is O(n).", true),
            case("java.io.FileReader", "java.util.HashSet", "java.io.FileReader is used to read character files; reading one character is O(1).", "java.util.HashSet is used to store unique elements; lookup is O(1).", false),
            case("java.util.HashMap", "java.util.TreeMap", "java.util.HashMap is used to map keys to values; lookups are O(1) on average.", "java.util.TreeMap is used to map keys to sorted values; lookups are O(log n).", true),
            case("java.sql.Connection", "java.io.File", "java.sql.Connection is used to talk to a database; opening one is slow.", "java.io.File is used to represent a path; creating one is cheap.", false),
        ],
        TypeConversion => [
            case("java.util.stream.Stream", "java.util.List", "java.util.stream.Stream can be converted to a List with collect or toList().", "java.util.List can be converted to a Stream with stream().", true),
            case("java.io.File", "java.lang.Thread", "java.io.File can be converted to a Path or a URI.", "java.lang.Thread is not usually converted to other data types.", false),
            case("java.lang.Integer", "java.lang.String", "java.lang.Integer can be converted to a String with toString().", "java.lang.String can be converted to an Integer with Integer.valueOf().", true),
            case("java.util.Scanner", "java.lang.Math", "java.util.Scanner is not usually converted to other data types.", "java.lang.Math has no instances and is not converted.", false),
        ],
    }
}

fn knowledge_text(c: &Case) -> String {
    format!("Knowledge of {}: {}\nKnowledge of {}: {}", c.api1, c.k1, c.api2, c.k2)
}

pub(crate) fn yes_no_input(relation: RelationType) -> String {
    format!("{{{{KNOWLEDGE}}}}\nQuestion: {}\nAnswer:", yes_no_question(relation))
}

pub(crate) fn statement_input(relation: RelationType) -> String {
    format!("{{{{KNOWLEDGE}}}}\nClaim: {}.\nThe claim is:", statement_claim(relation))
}

fn decider_examples(input: &str, relation: RelationType, yes: &str, no: &str) -> Vec<FewShotExample> {
    relation_cases(relation)
        .iter()
        .map(|c| {
            let k = knowledge_text(c);
            FewShotExample::new(
                fill(input, &[("KNOWLEDGE", &k), ("API1", c.api1), ("API2", c.api2)]),
                if c.holds { yes } else { no },
            )
        })
        .collect()
}

fn yes_no(relation: RelationType) -> PromptTemplate {
    let input = yes_no_input(relation);
    build(
        units::yes_no(relation),
        "Answer questions based on the knowledge block of APIs. Reply with \"yes\" or \"no\".".into(),
        decider_examples(&input, relation, "yes", "no"),
        input,
        &["KNOWLEDGE", "API1", "API2"],
    )
}

fn statement(relation: RelationType) -> PromptTemplate {
    let input = statement_input(relation);
    build(
        units::statement(relation),
        "Based on the knowledge block of APIs, determine if the provided claim about the two APIs is correct \
         or incorrect. Reply with \"correct\" or \"incorrect\"."
            .into(),
        decider_examples(&input, relation, "correct", "incorrect"),
        input,
        &["KNOWLEDGE", "API1", "API2"],
    )
}

pub const CHOICE_INPUT: &str = "{{KNOWLEDGE}}\nAPI pair: {{API1}}, {{API2}}\nRelation:";

fn choice() -> PromptTemplate {
    let mut description = String::from(
        "Choose the relation between the two APIs from the options below, based on the knowledge block of \
         the APIs. Choose \"unknown\" if no relation can be determined. Answer with the option name.",
    );
    for (i, r) in RelationType::ALL.iter().enumerate() {
        description.push_str(&format!("\n{}. {}: {}", option_letter(i), r.display_name(), r.definition()));
    }
    description.push_str(&format!("\n{UNKNOWN_LETTER}. unknown: No relation can be determined."));

    let picks = [
        (RelationType::EfficiencyComparison, 0, "efficiency comparison"),
        (RelationType::LogicConstraint, 0, "logic constraint"),
        (RelationType::TypeConversion, 0, "type conversion"),
        (RelationType::FunctionSimilarity, 1, "unknown"),
    ];
    let examples = picks
        .iter()
        .map(|(rel, idx, out)| {
            let c = &relation_cases(*rel)[*idx];
            let k = knowledge_text(c);
            FewShotExample::new(fill(CHOICE_INPUT, &[("KNOWLEDGE", &k), ("API1", c.api1), ("API2", c.api2)]), *out)
        })
        .collect();
    build(units::CHOICE.into(), description, examples, CHOICE_INPUT.into(), &["KNOWLEDGE", "API1", "API2"])
}

fn relation_menu() -> String {
    RelationType::ALL
        .iter()
        .map(|r| format!("- {}: {}", r.display_name(), r.definition()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub const DIRECT_INPUT: &str = "Text: {{TEXT}}\nRelations:";

fn direct() -> PromptTemplate {
    let cases = [
        (
            "Use ArrayList rather than LinkedList when you need fast random access.",
            "(java.util.ArrayList, java.util.LinkedList, efficiency comparison)",
        ),
        (
            "Open a java.sql.Connection first, then create a java.sql.Statement from it.",
            "(java.sql.Connection, java.sql.Statement, logic constraint)\n(java.sql.Connection, java.sql.Statement, function collaboration)",
        ),
        ("The weather API returned a 500 again today.", "none"),
        (
            "Collect the Stream into a List with Collectors.toList().",
            "(java.util.stream.Stream, java.util.List, type conversion)",
        ),
    ];
    let examples = cases
        .iter()
        .map(|(text, out)| FewShotExample::new(fill(DIRECT_INPUT, &[("TEXT", text)]), *out))
        .collect();
    build(
        units::DIRECT.into(),
        format!(
            "List the relations between the APIs mentioned in the text. Possible relations:\n{}\n\
             Write one relation per line as (API1 fully qualified name, API2 fully qualified name, relation), \
             or \"none\" if there is no relation.",
            relation_menu()
        ),
        examples,
        DIRECT_INPUT.into(),
        &["TEXT"],
    )
}

pub const COT_INPUT: &str = "Text: {{TEXT}}\nReasoning:";

fn cot() -> PromptTemplate {
    let cases = [
        (
            "Use ArrayList rather than LinkedList when you need fast random access.",
            "Step 1: the APIs are ArrayList -> java.util.ArrayList and LinkedList -> java.util.LinkedList.\n\
             Step 2: both store ordered lists; ArrayList has O(1) random access, LinkedList O(n).\n\
             Step 3: the pair has similar usage and different access cost.\n\
             Final answer:\n(java.util.ArrayList, java.util.LinkedList, function similarity)\n\
             (java.util.ArrayList, java.util.LinkedList, efficiency comparison)",
        ),
        (
            "Open a java.sql.Connection first, then create a Statement from it.",
            "Step 1: the APIs are java.sql.Connection and Statement -> java.sql.Statement.\n\
             Step 2: a Statement needs an open Connection; both are used to run SQL.\n\
             Step 3: the Connection must be used before the Statement, and they cooperate.\n\
             Final answer:\n(java.sql.Connection, java.sql.Statement, logic constraint)\n\
             (java.sql.Connection, java.sql.Statement, function collaboration)",
        ),
        (
            "The weather API returned a 500 again today.",
            "Step 1: no Java APIs are mentioned.\nFinal answer:\nnone",
        ),
        (
            "Collect the Stream into a List with Collectors.toList().",
            "Step 1: the APIs are Stream -> java.util.stream.Stream and List -> java.util.List.\n\
             Step 2: a Stream can be collected into a List, and a List can produce a Stream.\n\
             Step 3: the two types convert into each other.\n\
             Final answer:\n(java.util.stream.Stream, java.util.List, type conversion)",
        ),
    ];
    let examples = cases
        .iter()
        .map(|(text, out)| FewShotExample::new(fill(COT_INPUT, &[("TEXT", text)]), *out))
        .collect();
    build(
        units::COT.into(),
        format!(
            "Infer the relations between the APIs mentioned in the text step by step.\n\
             Step 1: find the APIs in the text and write their fully qualified names.\n\
             Step 2: for each API, recall its usage, characteristics, performance, conditions, usage \
             scenarios, tasks and convertible types.\n\
             Step 3: for each pair of APIs, decide which relations hold. Possible relations:\n{}\n\
             End with a line \"Final answer:\" followed by one relation per line as (API1, API2, relation), \
             or \"none\".",
            relation_menu()
        ),
        examples,
        COT_INPUT.into(),
        &["TEXT"],
    )
}

pub(crate) fn templates() -> Vec<PromptTemplate> {
    let mut out = vec![non_fqn(), fqn_inference()];
    out.extend(KnowledgeKind::ALL.into_iter().map(mining));
    out.extend(RelationType::ALL.into_iter().map(yes_no));
    out.extend(RelationType::ALL.into_iter().map(statement));
    out.extend([choice(), direct(), cot()]);
    out
}
