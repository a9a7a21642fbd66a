//! Run configuration, resolved flags > environment > file > defaults, and
//! construction of the gateway and catalog it describes.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{
    CompletionBackend, Decoding, DiskCache, FixtureStore, Gateway, GatewayError, HttpBackend, HttpConfig,
    MockScript, ReplayBackend, RetryPolicy, ScriptedBackend, DEFAULT_CONCURRENCY,
};
use crate::model::RelationType;
use crate::pipeline::{RunSettings, Variant};
use crate::prompting::{PromptCatalog, PromptError, DEFAULT_EXAMPLE_COUNT};

pub const ENV_PREFIX: &str = "APICHAIN_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    File { path: String, reason: String },
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("{0}")]
    Missing(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Replay,
    Mock,
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "http" => Ok(BackendKind::Http),
            "replay" => Ok(BackendKind::Replay),
            "mock" => Ok(BackendKind::Mock),
            other => Err(format!("unknown backend {other:?}; expected http, replay or mock")),
        }
    }
}

/// One source of settings; unset fields defer to lower layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub backend: Option<BackendKind>,
    pub variant: Option<Variant>,
    /// Relation names, e.g. `["function similarity", "type-conversion"]`.
    pub relations: Option<Vec<String>>,
    pub concurrency: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub fixtures_dir: Option<PathBuf>,
    pub catalog_dir: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub examples: Option<usize>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub http: Option<HttpLayer>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpLayer {
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_attempts: Option<u32>,
    pub initial_backoff_ms: Option<u64>,
}

fn invalid(key: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_env<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: ToString,
{
    value.trim().parse().map_err(|e: T::Err| invalid(key, e))
}

/// Splits a comma-separated relation list.
pub fn split_relations(list: &str) -> Vec<String> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

impl ConfigLayer {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let file_err = |reason: String| ConfigError::File {
            path: path.display().to_string(),
            reason,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        toml::from_str(&raw).map_err(|e| file_err(e.to_string()))
    }

    /// Reads `APICHAIN_*` variables from `vars`.
    pub fn from_env(vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let mut layer = ConfigLayer::default();
        let mut http = HttpLayer::default();
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "BACKEND" => layer.backend = Some(parse_env(&key, &value)?),
                "VARIANT" => layer.variant = Some(parse_env(&key, &value)?),
                "RELATIONS" => layer.relations = Some(split_relations(&value)),
                "CONCURRENCY" => layer.concurrency = Some(parse_env(&key, &value)?),
                "CACHE_DIR" => layer.cache_dir = Some(value.into()),
                "FIXTURES_DIR" => layer.fixtures_dir = Some(value.into()),
                "CATALOG_DIR" => layer.catalog_dir = Some(value.into()),
                "MOCK_SCRIPT" => layer.mock_script = Some(value.into()),
                "EXAMPLES" => layer.examples = Some(parse_env(&key, &value)?),
                "MODEL" => layer.model = Some(value),
                "TEMPERATURE" => layer.temperature = Some(parse_env(&key, &value)?),
                "MAX_TOKENS" => layer.max_tokens = Some(parse_env(&key, &value)?),
                "ENDPOINT" => http.endpoint = Some(value),
                "API_KEY_ENV" => http.api_key_env = Some(value),
                "TIMEOUT_SECS" => http.timeout_secs = Some(parse_env(&key, &value)?),
                _ => {}
            }
        }
        if http != HttpLayer::default() {
            layer.http = Some(http);
        }
        Ok(layer)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        let http = match (self.http, lower.http) {
            (Some(h), Some(l)) => Some(HttpLayer {
                endpoint: h.endpoint.or(l.endpoint),
                api_key_env: h.api_key_env.or(l.api_key_env),
                timeout_secs: h.timeout_secs.or(l.timeout_secs),
                max_attempts: h.max_attempts.or(l.max_attempts),
                initial_backoff_ms: h.initial_backoff_ms.or(l.initial_backoff_ms),
            }),
            (h, l) => h.or(l),
        };
        ConfigLayer {
            backend: self.backend.or(lower.backend),
            variant: self.variant.or(lower.variant),
            relations: self.relations.or(lower.relations),
            concurrency: self.concurrency.or(lower.concurrency),
            cache_dir: self.cache_dir.or(lower.cache_dir),
            fixtures_dir: self.fixtures_dir.or(lower.fixtures_dir),
            catalog_dir: self.catalog_dir.or(lower.catalog_dir),
            mock_script: self.mock_script.or(lower.mock_script),
            examples: self.examples.or(lower.examples),
            model: self.model.or(lower.model),
            temperature: self.temperature.or(lower.temperature),
            max_tokens: self.max_tokens.or(lower.max_tokens),
            http,
        }
    }
}

/// Fully resolved settings for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub backend: BackendKind,
    pub settings: RunSettings,
    pub concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub fixtures_dir: Option<PathBuf>,
    pub catalog_dir: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub examples: usize,
    pub decoding: Decoding,
    pub http: HttpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend: BackendKind::Replay,
            settings: RunSettings::default(),
            concurrency: DEFAULT_CONCURRENCY,
            cache_dir: None,
            fixtures_dir: None,
            catalog_dir: None,
            mock_script: None,
            examples: DEFAULT_EXAMPLE_COUNT,
            decoding: Decoding::default(),
            http: HttpConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Layers `flags`, the process environment and an optional file over
    /// the defaults.
    pub fn resolve(flags: ConfigLayer, file: Option<&Path>) -> Result<Self, ConfigError> {
        let env = ConfigLayer::from_env(std::env::vars())?;
        let file = match file {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        PipelineConfig::from_layer(flags.over(env).over(file))
    }

    pub fn from_layer(layer: ConfigLayer) -> Result<Self, ConfigError> {
        let d = PipelineConfig::default();
        let relations = match layer.relations {
            Some(names) => names
                .iter()
                .map(|n| n.parse::<RelationType>().map_err(|e| invalid("relations", e)))
                .collect::<Result<Vec<_>, _>>()?,
            None => RelationType::ALL.to_vec(),
        };
        let settings = RunSettings::new(layer.variant.unwrap_or(d.settings.variant), relations)
            .map_err(|e| invalid("relations", e))?;
        let concurrency = layer.concurrency.unwrap_or(d.concurrency);
        if concurrency == 0 {
            return Err(invalid("concurrency", "must be at least 1"));
        }
        let decoding = Decoding {
            model: layer.model.unwrap_or(d.decoding.model),
            temperature: layer.temperature.unwrap_or(d.decoding.temperature),
            max_tokens: layer.max_tokens.unwrap_or(d.decoding.max_tokens),
            stop: None,
        };
        if !(0.0..=2.0).contains(&decoding.temperature) {
            return Err(invalid("temperature", "must be within [0, 2]"));
        }
        if decoding.max_tokens == 0 {
            return Err(invalid("max_tokens", "must be positive"));
        }
        let h = layer.http.unwrap_or_default();
        let http = HttpConfig {
            endpoint: h.endpoint.unwrap_or(d.http.endpoint),
            api_key_env: h.api_key_env.unwrap_or(d.http.api_key_env),
            timeout_secs: h.timeout_secs.unwrap_or(d.http.timeout_secs),
            retry: RetryPolicy {
                max_attempts: h.max_attempts.unwrap_or(d.http.retry.max_attempts).max(1),
                initial_backoff_ms: h.initial_backoff_ms.unwrap_or(d.http.retry.initial_backoff_ms),
                multiplier: d.http.retry.multiplier,
            },
        };
        Ok(PipelineConfig {
            backend: layer.backend.unwrap_or(d.backend),
            settings,
            concurrency,
            cache_dir: layer.cache_dir,
            fixtures_dir: layer.fixtures_dir,
            catalog_dir: layer.catalog_dir,
            mock_script: layer.mock_script,
            examples: layer.examples.unwrap_or(d.examples),
            decoding,
            http,
        })
    }

    pub fn backend(&self) -> Result<Arc<dyn CompletionBackend>, ConfigError> {
        Ok(match self.backend {
            BackendKind::Http => Arc::new(HttpBackend::new(self.http.clone())?),
            BackendKind::Replay => {
                let dir = self
                    .fixtures_dir
                    .as_ref()
                    .ok_or_else(|| ConfigError::Missing("replay backend needs a fixtures directory".into()))?;
                if !dir.is_dir() {
                    return Err(invalid("fixtures_dir", format!("{} is not a directory", dir.display())));
                }
                Arc::new(ReplayBackend::new(FixtureStore::new(dir)))
            }
            BackendKind::Mock => {
                let path = self
                    .mock_script
                    .as_ref()
                    .ok_or_else(|| ConfigError::Missing("mock backend needs a mock script".into()))?;
                Arc::new(ScriptedBackend::new(MockScript::load(path)?))
            }
        })
    }

    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        let mut gateway = Gateway::new(self.backend()?)
            .with_decoding(self.decoding.clone())
            .with_concurrency(self.concurrency);
        if let Some(dir) = &self.cache_dir {
            gateway = gateway.with_cache(DiskCache::new(dir));
        }
        Ok(gateway)
    }

    pub fn catalog(&self) -> Result<PromptCatalog, ConfigError> {
        let catalog = match &self.catalog_dir {
            Some(dir) => PromptCatalog::load_dir(dir)?,
            None => PromptCatalog::bundled(),
        };
        Ok(catalog.with_example_limit(self.examples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> ConfigLayer {
        ConfigLayer::from_env(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string()))).unwrap()
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::from_layer(ConfigLayer::default()).unwrap();
        assert_eq!(c.settings.relations.len(), 7);
        assert_eq!(c.settings.variant, Variant::Full);
        assert_eq!(c.decoding.model, "text-davinci-003");
        assert_eq!(c.decoding.temperature, 0.0);
        assert_eq!(c.decoding.max_tokens, 256);
        assert_eq!(c.http.retry.max_attempts, 3);
        assert_eq!(c.http.api_key_env, "APICHAIN_API_KEY");
    }

    #[test]
    fn precedence() {
        let file: ConfigLayer = toml::from_str(
            "concurrency = 2\nmodel = \"file-model\"\nvariant = \"ard1\"\n[http]\nendpoint = \"http://file\"\ntimeout_secs = 5\n",
        )
        .unwrap();
        let env = env(&[
            ("APICHAIN_CONCURRENCY", "3"),
            ("APICHAIN_MODEL", "env-model"),
            ("APICHAIN_ENDPOINT", "http://env"),
            ("HOME", "/root"),
        ]);
        let flags = ConfigLayer {
            concurrency: Some(9),
            ..Default::default()
        };
        let c = PipelineConfig::from_layer(flags.over(env).over(file)).unwrap();
        assert_eq!(c.concurrency, 9);
        assert_eq!(c.decoding.model, "env-model");
        assert_eq!(c.settings.variant, Variant::Ard1);
        assert_eq!(c.http.endpoint, "http://env");
        assert_eq!(c.http.timeout_secs, 5);
    }

    #[test]
    fn bad_values_are_reported() {
        assert!(ConfigLayer::from_env([("APICHAIN_CONCURRENCY".into(), "many".into())]).is_err());
        let layer = ConfigLayer {
            relations: Some(vec![]),
            ..Default::default()
        };
        assert!(PipelineConfig::from_layer(layer).is_err());
        let layer = ConfigLayer {
            relations: Some(vec!["inheritance".into()]),
            ..Default::default()
        };
        assert!(PipelineConfig::from_layer(layer).is_err());
        assert!(toml::from_str::<ConfigLayer>("colour = 1").is_err());
    }

    #[test]
    fn relation_subset_parses_names() {
        let layer = env(&[("APICHAIN_RELATIONS", "function-similarity, Type Conversion")]);
        let c = PipelineConfig::from_layer(layer).unwrap();
        assert_eq!(c.settings.relations, [RelationType::FunctionSimilarity, RelationType::TypeConversion]);
    }

    #[test]
    fn replay_needs_fixtures() {
        let c = PipelineConfig::default();
        assert!(matches!(c.gateway(), Err(ConfigError::Missing(_))));
    }
}
