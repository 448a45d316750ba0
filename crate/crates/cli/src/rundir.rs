use std::path::{Path, PathBuf};

use anyhow::Context;
use distill_lab::pipeline::RunConfig;
use serde_json::json;

/// `<out>/<subcommand>-<config hash>/`, holding the exact config and every
/// artifact of one invocation.
pub struct RunDir {
    pub path: PathBuf,
    pub id: String,
}

impl RunDir {
    /// `inputs` are artifact paths the run reads; they enter the hash.
    pub fn create(
        out: &Path,
        subcommand: &str,
        cfg: &RunConfig,
        inputs: &[(&str, PathBuf)],
    ) -> anyhow::Result<Self> {
        let listed: Vec<String> = inputs
            .iter()
            .map(|(k, p)| format!("{k}={}", p.display()))
            .collect();
        let hash = cfg.hash_with(&listed.join("\n"));
        let id = format!("{subcommand}-{hash}");
        let path = out.join(&id);
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let dir = Self { path, id };
        dir.write("config.toml", cfg.to_toml())?;
        let meta = json!({
            "run_id": dir.id,
            "subcommand": subcommand,
            "config_hash": hash,
            "seed": cfg.seed,
            "inputs": listed,
            "version": env!("CARGO_PKG_VERSION"),
        });
        dir.write(
            "run.json",
            format!("{}\n", serde_json::to_string_pretty(&meta)?),
        )?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    pub fn create_file(&self, name: &str) -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok(std::io::BufWriter::new(f))
    }
}

pub fn error_record(subcommand: &str, kind: &str, message: &str) -> serde_json::Value {
    json!({
        "status": "error",
        "subcommand": subcommand,
        "kind": kind,
        "message": message,
    })
}
