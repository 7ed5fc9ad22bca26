//! Report plumbing. Every report is a JSON object carrying the tool
//! version, the full command configuration, and a sha256 of that
//! configuration's canonical serialization, so a run can be reproduced
//! from its report alone and tampering is detectable.

use crate::AppError;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub fn sha256_hex(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Assemble a report: version + config + config hash + body fields.
/// serde_json maps are sorted, so the hashed serialization is canonical.
pub fn wrap(config: Value, body: Value) -> Value {
    let mut report = serde_json::Map::new();
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("config_sha256".into(), json!(sha256_hex(&config.to_string())));
    report.insert("config".into(), config);
    if let Value::Object(fields) = body {
        for (k, v) in fields {
            report.insert(k, v);
        }
    }
    Value::Object(report)
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), AppError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Usage(format!("{} is not valid JSON: {e}", path.display())))
}

/// `report` command: print a summary line per file and re-check each
/// embedded config hash. Any hash mismatch fails the command.
pub fn summarize(files: &[PathBuf]) -> Result<(), AppError> {
    if files.is_empty() {
        return Err(AppError::Usage("report needs at least one file".into()));
    }
    let mut tampered = Vec::new();
    for path in files {
        let v = read_json(path)?;
        let version = v.get("version").and_then(Value::as_str).unwrap_or("?");
        let stored = v.get("config_sha256").and_then(Value::as_str).unwrap_or("");
        let config = v.get("config").cloned().unwrap_or(Value::Null);
        let actual = sha256_hex(&config.to_string());
        let hash_ok = stored == actual;
        if !hash_ok {
            tampered.push(path.display().to_string());
        }
        let mut extras: Vec<String> = Vec::new();
        for (k, val) in v.as_object().into_iter().flatten() {
            if matches!(k.as_str(), "version" | "config" | "config_sha256") {
                continue;
            }
            match val {
                Value::String(s) => extras.push(format!("{k}={s}")),
                Value::Number(n) => extras.push(format!("{k}={n}")),
                Value::Bool(b) => extras.push(format!("{k}={b}")),
                _ => {}
            }
        }
        println!(
            "{}: version {version}, config hash {}, {}",
            path.display(),
            if hash_ok { "OK" } else { "MISMATCH" },
            extras.join(", ")
        );
    }
    if tampered.is_empty() {
        Ok(())
    } else {
        Err(AppError::failure(format!(
            "config hash mismatch in: {}",
            tampered.join(", ")
        )))
    }
}
