//! Output files, each stamped with version, config hash and seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::Config;

pub struct Out {
    dir: PathBuf,
    stamp: String,
    meta: Value,
    pub written: Vec<PathBuf>,
}

impl Out {
    pub fn new(dir: &Path, cfg: &Config, command: &str) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let config: Map<String, Value> = cfg
            .entries()
            .map(|(k, v)| (k.to_string(), Value::from(v)))
            .collect();
        Ok(Self {
            dir: dir.to_path_buf(),
            stamp: format!(
                "# hlp {} {command} config_sha256={} seed={}\n",
                hlp::VERSION,
                cfg.hash,
                cfg.seed
            ),
            meta: json!({
                "version": hlp::VERSION,
                "command": command,
                "config_sha256": cfg.hash,
                "seed": cfg.seed,
                "config": config,
            }),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, body: String) -> std::io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with the stamp as a leading comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        self.put(name, format!("{}{body}", self.stamp))
    }

    /// Formats whose first line is a magic header keep it first.
    pub fn after_header(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let (head, rest) = body.split_once('\n').unwrap_or((body, ""));
        self.put(name, format!("{head}\n{}{rest}", self.stamp))
    }

    /// JSON sidecar: run metadata plus `result`.
    pub fn json(&mut self, name: &str, result: Value) -> std::io::Result<()> {
        let mut v = self.meta.clone();
        v["result"] = result;
        let text = serde_json::to_string_pretty(&v).expect("JSON values serialize");
        self.put(name, text + "\n")
    }
}
