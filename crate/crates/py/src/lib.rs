//! Python module `apichain`.

use std::path::PathBuf;

use apichain::config::{BackendKind, ConfigLayer, PipelineConfig};
use apichain::eval::{self, Triple};
use apichain::gateway::Gateway;
use apichain::model::{self, make_pair, RelationType};
use apichain::parser;
use apichain::pipeline::{self, RunSettings};
use apichain::prompting::PromptCatalog;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (json,))
}

#[pyfunction]
fn normalize_fqn(raw: &str) -> PyResult<String> {
    model::normalize_fqn(raw).map(|f| f.to_string()).map_err(value_err)
}

#[pyfunction]
fn extract_fqns(text: &str) -> Vec<String> {
    parser::extract_fqns(text).iter().map(|f| f.to_string()).collect()
}

#[pyfunction]
fn generate_pairs(fqns: Vec<String>) -> PyResult<Vec<(String, String)>> {
    let parsed = fqns.iter().map(|s| model::normalize_fqn(s)).collect::<Result<Vec<_>, _>>().map_err(value_err)?;
    Ok(parser::generate_pairs(&parsed)
        .iter()
        .map(|p| (p.first().to_string(), p.second().to_string()))
        .collect())
}

#[pyfunction]
fn relation_types() -> Vec<&'static str> {
    RelationType::ALL.iter().map(|r| r.slug()).collect()
}

#[pyclass(frozen, get_all)]
struct Metrics {
    precision: f64,
    recall: f64,
    f1: f64,
    tp: u64,
    fp: u64,
    r#fn: u64,
}

#[pymethods]
impl Metrics {
    fn __repr__(&self) -> String {
        format!(
            "Metrics(precision={:.4}, recall={:.4}, f1={:.4}, tp={}, fp={}, fn={})",
            self.precision, self.recall, self.f1, self.tp, self.fp, self.r#fn
        )
    }
}

fn triples(rows: Vec<(String, String, String, String)>) -> PyResult<Vec<Triple>> {
    rows.into_iter()
        .map(|(id, a, b, rel)| {
            let pair = make_pair(
                model::normalize_fqn(&a).map_err(value_err)?,
                model::normalize_fqn(&b).map_err(value_err)?,
            )
            .map_err(value_err)?;
            let relation = rel.parse::<RelationType>().map_err(value_err)?;
            Ok(Triple { id, pair, relation })
        })
        .collect()
}

/// Scores `(id, api1, api2, relation)` tuples against gold tuples.
#[pyfunction]
fn score_relations(
    predicted: Vec<(String, String, String, String)>,
    gold: Vec<(String, String, String, String)>,
) -> PyResult<Metrics> {
    let m = eval::score_relations(&triples(predicted)?, &triples(gold)?);
    Ok(Metrics {
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        tp: m.tp,
        fp: m.fp,
        r#fn: m.fn_,
    })
}

/// A configured gateway plus run settings. Results come back as plain dicts.
#[pyclass(frozen)]
struct Pipeline {
    gateway: Gateway,
    catalog: PromptCatalog,
    settings: RunSettings,
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (backend="replay", fixtures=None, mock_script=None, cache=None, variant=None, relations=None, concurrency=None))]
    fn new(
        backend: &str,
        fixtures: Option<PathBuf>,
        mock_script: Option<PathBuf>,
        cache: Option<PathBuf>,
        variant: Option<&str>,
        relations: Option<Vec<String>>,
        concurrency: Option<usize>,
    ) -> PyResult<Self> {
        let layer = ConfigLayer {
            backend: Some(backend.parse::<BackendKind>().map_err(value_err)?),
            variant: variant.map(|v| v.parse()).transpose().map_err(value_err)?,
            relations,
            concurrency,
            cache_dir: cache,
            fixtures_dir: fixtures,
            mock_script,
            ..ConfigLayer::default()
        };
        let config = PipelineConfig::from_layer(layer).map_err(value_err)?;
        Ok(Pipeline {
            gateway: config.gateway().map_err(value_err)?,
            catalog: config.catalog().map_err(value_err)?,
            settings: config.settings,
        })
    }

    fn parse<'py>(&self, py: Python<'py>, id: &str, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let parsed = py
            .detach(|| parser::parse(id, text, &self.catalog, &self.gateway))
            .map_err(value_err)?;
        to_py(py, &parsed)
    }

    fn infer<'py>(&self, py: Python<'py>, id: &str, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let report = py.detach(|| pipeline::infer_relations(id, text, &self.settings, &self.catalog, &self.gateway));
        to_py(py, &report)
    }

    fn infer_batch<'py>(&self, py: Python<'py>, inputs: Vec<(String, String)>) -> PyResult<Bound<'py, PyAny>> {
        let reports = py.detach(|| pipeline::infer_batch(&inputs, &self.settings, &self.catalog, &self.gateway));
        to_py(py, &reports)
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.gateway.stats();
        let d = PyDict::new(py);
        d.set_item("gateway_calls", s.gateway_calls)?;
        d.set_item("cache_hits", s.cache_hits)?;
        Ok(d)
    }

    #[getter]
    fn backend_id(&self) -> &str {
        self.gateway.backend_id()
    }
}

#[pymodule]
#[pyo3(name = "apichain")]
fn apichain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds the module contents to `m`; used for embedding without the shared library.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_fqn, m)?)?;
    m.add_function(wrap_pyfunction!(extract_fqns, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(relation_types, m)?)?;
    m.add_function(wrap_pyfunction!(score_relations, m)?)?;
    m.add_class::<Metrics>()?;
    m.add_class::<Pipeline>()?;
    Ok(())
}
