//! The flat key-value config format: one `key = value` per line, `#`
//! comments. A manifest.json from a previous run is accepted too (its
//! `config` object supplies the same keys), so a sweep can be rerun from
//! its manifest alone.

use std::collections::BTreeMap;
use std::path::Path;

use crate::util::{CliError, CliResult};

pub fn load(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        return from_manifest(&text, path);
    }
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!(
                "{}:{}: expected \"key = value\"",
                path.display(),
                i + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn from_manifest(text: &str, path: &Path) -> CliResult<BTreeMap<String, String>> {
    let json: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("{}: bad manifest: {e}", path.display())))?;
    let config = json
        .get("config")
        .and_then(|c| c.as_object())
        .ok_or_else(|| {
            CliError::Config(format!(
                "{}: manifest has no config object",
                path.display()
            ))
        })?;
    let mut map = BTreeMap::new();
    for (key, value) in config {
        let text = match value {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        map.insert(key.clone(), text);
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_kv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.conf");
        std::fs::write(&path, "# grid\np = 0.5,0.6\nk=10\n\nmodel = distance\n").unwrap();
        let map = load(&path).unwrap();
        assert_eq!(map["p"], "0.5,0.6");
        assert_eq!(map["k"], "10");
        assert_eq!(map["model"], "distance");
    }

    #[test]
    fn parses_manifest_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"command":"sweep","config":{"p":"0.5","reps":7}}"#,
        )
        .unwrap();
        let map = load(&path).unwrap();
        assert_eq!(map["p"], "0.5");
        assert_eq!(map["reps"], "7");
    }
}
