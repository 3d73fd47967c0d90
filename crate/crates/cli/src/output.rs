use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::manifest::RunManifest;
use crate::CliError;

pub enum Body {
    /// Merged with the manifest into one JSON object.
    Json(Value),
    /// CSV text; the manifest goes on a leading `#` comment line.
    Csv(String),
}

pub struct Artifact {
    pub file: String,
    pub body: Body,
}

impl Artifact {
    pub fn json(file: &str, value: impl Serialize) -> Result<Self, CliError> {
        Ok(Self { file: file.to_string(), body: Body::Json(serde_json::to_value(value)?) })
    }

    pub fn csv(file: &str, text: String) -> Self {
        Self { file: file.to_string(), body: Body::Csv(text) }
    }

    fn render(&self, manifest: &RunManifest) -> Result<String, CliError> {
        let m = serde_json::to_value(manifest)?;
        Ok(match &self.body {
            Body::Json(v) => {
                let mut obj = Map::new();
                obj.insert("manifest".into(), m);
                match v {
                    Value::Object(fields) => obj.extend(fields.clone()),
                    other => {
                        obj.insert("data".into(), other.clone());
                    }
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(obj))?;
                s.push('\n');
                s
            }
            Body::Csv(text) => format!("# manifest: {}\n{text}", serde_json::to_string(&m)?),
        })
    }
}

/// With a directory every artifact is written there; otherwise the first
/// artifact goes to stdout and the rest are dropped.
pub fn emit(mut manifest: RunManifest, artifacts: &[Artifact], dir: Option<&Path>) -> Result<(), CliError> {
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            let paths: Vec<PathBuf> = artifacts.iter().map(|a| dir.join(&a.file)).collect();
            manifest.outputs = paths.iter().map(|p| p.display().to_string()).collect();
            for (a, p) in artifacts.iter().zip(&paths) {
                std::fs::write(p, a.render(&manifest)?).map_err(|e| CliError::io(p, e))?;
            }
            for p in &paths {
                println!("wrote {}", p.display());
            }
        }
        None => {
            manifest.outputs = vec!["stdout".into()];
            if let Some(first) = artifacts.first() {
                std::io::stdout()
                    .write_all(first.render(&manifest)?.as_bytes())
                    .map_err(|e| CliError::io(Path::new("stdout"), e))?;
            }
        }
    }
    Ok(())
}
