use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct InputText {
    pub id: String,
    pub text: String,
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

/// Reads `.jsonl` / `.ndjson` files as `{id, text}` rows and anything else as
/// one trimmed document named after the file stem. Also returns the raw bytes for
/// the manifest digest.
pub fn read_inputs(path: &Path) -> Result<(Vec<InputText>, Vec<u8>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let raw = String::from_utf8(bytes.clone()).map_err(|e| format!("{}: {e}", path.display()))?;
    if !is_jsonl(path) {
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("input").to_string();
        return Ok((vec![InputText { id, text: raw.trim().to_string() }], bytes));
    }
    let mut texts = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: InputText = serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
        if !ids.insert(t.id.clone()) {
            return Err(format!("{}:{}: duplicate id {:?}", path.display(), i + 1, t.id));
        }
        texts.push(t);
    }
    Ok((texts, bytes))
}
