use std::path::{Path, PathBuf};
use std::time::Instant;

use apichain::config::PipelineConfig;
use apichain::gateway::GatewayStats;
use apichain::pipeline::RelationReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub texts: usize,
    pub pairs: usize,
    pub gateway_calls: u64,
    pub cache_hits: u64,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStats {
    pub id: String,
    pub pairs: usize,
    pub gateway_calls: u64,
    pub cache_hits: u64,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Written next to every output as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PipelineConfig>,
    pub input: PathBuf,
    /// `sha256:<hex>` of the input bytes.
    pub input_digest: String,
    pub backend_id: String,
    pub started_at: String,
    pub finished_at: String,
    pub totals: Totals,
    pub texts: Vec<TextStats>,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config: Option<&PipelineConfig>, input: &Path, bytes: &[u8], backend_id: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            config: config.cloned(),
            input: input.to_path_buf(),
            input_digest: digest_bytes(bytes),
            backend_id: backend_id.to_string(),
            started_at: now(),
            finished_at: String::new(),
            totals: Totals::default(),
            texts: Vec::new(),
        }
    }

    pub fn record_text(&mut self, id: &str, stats: GatewayStats, started: Instant, pairs: usize, error: Option<String>) {
        self.push(TextStats {
            id: id.to_string(),
            pairs,
            gateway_calls: stats.gateway_calls,
            cache_hits: stats.cache_hits,
            elapsed_ms: started.elapsed().as_millis() as u64,
            error,
        });
    }

    pub fn record_report(&mut self, report: &RelationReport) {
        let mut pairs: Vec<_> = report.triples.iter().map(|t| &t.pair).collect();
        pairs.dedup();
        self.push(TextStats {
            id: report.source_id.clone(),
            pairs: pairs.len(),
            gateway_calls: report.stats.gateway_calls,
            cache_hits: report.stats.cache_hits,
            elapsed_ms: report.stats.elapsed_ms,
            error: report.error.clone(),
        });
    }

    fn push(&mut self, t: TextStats) {
        self.totals.texts += 1;
        self.totals.pairs += t.pairs;
        self.totals.gateway_calls += t.gateway_calls;
        self.totals.cache_hits += t.cache_hits;
        self.totals.errors += usize::from(t.error.is_some());
        self.texts.push(t);
    }

    /// Stamps the end time and writes the manifest beside `output`.
    pub fn finish(&mut self, output: &Path) -> Result<(), String> {
        self.finished_at = now();
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| e.to_string())?;
        bytes.push(b'\n');
        let path = manifest_path(output);
        std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn load(output: &Path) -> Result<Self, String> {
        let path = manifest_path(output);
        let raw = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_slice(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }
}
