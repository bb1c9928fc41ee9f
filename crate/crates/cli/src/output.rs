//! Result files. Every file starts with the config hash and the seed list so
//! that a payload can be traced back to the exact inputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use oscchain::experiment::ExperimentConfig;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Provenance shared by all files of one run.
#[derive(Debug, Clone)]
pub struct Stamp {
    pub config_hash: String,
    pub seeds: String,
}

impl Stamp {
    pub fn new(config: &ExperimentConfig, replicas: Option<usize>) -> Self {
        let digest = Sha256::digest(config.to_json().as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        let seeds = match replicas {
            Some(n) => format!("{} replicas 0..{}", config.seed, n),
            None => config.seed.to_string(),
        };
        Self { config_hash, seeds }
    }

    fn csv_header(&self, columns: &str) -> String {
        format!("# config_sha256={}\n# seeds={}\n{columns}\n", self.config_hash, self.seeds)
    }
}

pub struct OutDir {
    root: PathBuf,
    stamp: Stamp,
}

impl OutDir {
    pub fn create(root: &Path, stamp: Stamp) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), stamp })
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn csv(&self, name: &str, columns: &str, rows: &str) -> Result<()> {
        self.write(name, &(self.stamp.csv_header(columns) + rows))
    }

    /// Pretty JSON with `config_sha256` and `seeds` merged in front.
    pub fn json<T: Serialize>(&self, name: &str, payload: &T) -> Result<()> {
        let mut map = Map::new();
        map.insert("config_sha256".into(), json!(self.stamp.config_hash));
        map.insert("seeds".into(), json!(self.stamp.seeds));
        match serde_json::to_value(payload)? {
            Value::Object(fields) => map.extend(fields),
            other => {
                map.insert("payload".into(), other);
            }
        }
        self.write(name, &(serde_json::to_string_pretty(&Value::Object(map))? + "\n"))
    }

    pub fn config_echo(&self, config: &ExperimentConfig) -> Result<()> {
        self.write("config.json", &(config.to_json() + "\n"))
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
