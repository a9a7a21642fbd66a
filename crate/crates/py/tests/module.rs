use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) -> PyResult<()> {
    Python::attach(|py| {
        let module = PyModule::new(py, "apichain")?;
        apichain_py::register(&module)?;
        let globals = PyDict::new(py);
        globals.set_item("ac", module)?;
        globals.set_item("data", concat!(env!("CARGO_MANIFEST_DIR"), "/../cli/tests/data"))?;
        py.run(&std::ffi::CString::new(code).unwrap(), Some(&globals), None)
    })
}

#[test]
fn pure_functions() {
    run(r#"
assert ac.normalize_fqn("java.lang.String.valueOf()") == "java.lang.String.valueOf"
assert ac.generate_pairs(["x.Y", "a.B", "m.N"]) == [("a.B", "m.N"), ("a.B", "x.Y"), ("m.N", "x.Y")]
assert "function-similarity" in ac.relation_types()
m = ac.score_relations([], [("t", "a.B", "c.D", "logic-constraint")])
assert (m.precision, m.recall, m.f1, m.fn) == (0.0, 0.0, 0.0, 1)
"#)
    .unwrap();
}

#[test]
fn errors_become_value_errors() {
    let err = run(r#"ac.score_relations([("t", "a.B", "a.B", "logic-constraint")], [])"#).unwrap_err();
    Python::attach(|py| assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py)));
    let err = run(r#"ac.Pipeline(backend="replay", fixtures="/nonexistent")"#).unwrap_err();
    assert!(err.to_string().contains("fixtures"), "{err}");
}

#[test]
fn replay_pipeline() {
    run(r#"
pipe = ac.Pipeline(backend="replay", fixtures=data + "/strings/fixtures", relations=["function-replace"])
reports = pipe.infer_batch([("a", open(data + "/strings/strings.txt").read().strip())])
assert [t["relation"] for t in reports[0]["triples"] if t["holds"]] == ["function-replace"] * 3, reports
assert pipe.stats()["gateway_calls"] > 0
"#)
    .unwrap();
}
