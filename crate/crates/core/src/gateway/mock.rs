use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionBackend, CompletionRequest, GatewayError};

/// Prompts are split into blocks by this line; rules match the last block.
pub const BLOCK_SEPARATOR: &str = "\n---\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    /// Every substring must occur; `"*"` matches anything.
    pub contains: Vec<String>,
    #[serde(default)]
    pub reply: String,
    /// When set, the rule fails the call as an unavailable backend.
    #[serde(default)]
    pub fail: bool,
}

/// Ordered reply rules, first match wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<String>,
    /// Match against the whole prompt rather than its final block.
    #[serde(default)]
    pub match_whole_prompt: bool,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::InvalidRequest(format!("mock script {}: {e}", path.display())))
    }
}

/// Deterministic in-process backend driven by a [`MockScript`].
///
/// Counts calls, captures prompts and tracks peak concurrency for tests.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: MockScript,
    delay: Option<Duration>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn new(script: MockScript) -> Self {
        ScriptedBackend {
            script,
            delay: None,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    /// `("*", "yes")` style shorthand.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let rules = pairs
            .into_iter()
            .map(|(pat, reply)| MockRule {
                contains: vec![pat.to_string()],
                reply: reply.to_string(),
                fail: false,
            })
            .collect();
        ScriptedBackend::new(MockScript {
            rules,
            ..MockScript::default()
        })
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    fn reply_for(&self, prompt: &str) -> Result<String, GatewayError> {
        let scope = if self.script.match_whole_prompt {
            prompt
        } else {
            prompt.rsplit(BLOCK_SEPARATOR).next().unwrap_or(prompt)
        };
        let rule = self.script.rules.iter().find(|rule| {
            rule.contains
                .iter()
                .all(|needle| needle == "*" || scope.contains(needle.as_str()))
        });
        match rule {
            Some(r) if r.fail => Err(GatewayError::BackendUnavailable {
                attempts: 1,
                last: "scripted failure".into(),
            }),
            Some(r) => Ok(r.reply.clone()),
            None => self.script.default.clone().ok_or_else(|| GatewayError::BackendUnavailable {
                attempts: 1,
                last: "no scripted reply matches".into(),
            }),
        }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.prompts.lock().unwrap().push(req.prompt.clone());
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        let out = self.reply_for(&req.prompt);
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_match_final_block_in_order() {
        let backend = ScriptedBackend::new(MockScript {
            rules: vec![
                MockRule { contains: vec!["alpha".into(), "beta".into()], reply: "both".into(), fail: false },
                MockRule { contains: vec!["alpha".into()], reply: "one".into(), fail: false },
            ],
            default: Some("none".into()),
            match_whole_prompt: false,
        });
        let ask = |p: &str| backend.complete(&CompletionRequest::new(p)).unwrap();
        assert_eq!(ask("alpha beta"), "both");
        assert_eq!(ask("alpha"), "one");
        assert_eq!(ask("alpha beta\n---\ngamma"), "none");
        assert_eq!(backend.call_count(), 3);
        assert_eq!(backend.prompts().len(), 3);
    }

    #[test]
    fn unmatched_without_default_fails() {
        let backend = ScriptedBackend::new(MockScript::default());
        assert!(backend.complete(&CompletionRequest::new("x")).is_err());
    }
}
