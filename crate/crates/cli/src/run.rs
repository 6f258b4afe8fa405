use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::Utc;
use lre_core::config::RunConfig;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Output directory of one invocation plus its manifest.
pub struct RunDir {
    pub path: PathBuf,
    manifest: Value,
    started: Instant,
}

fn git_describe() -> String {
    Process::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

impl RunDir {
    /// `<out>/<command>-<UTC timestamp>-<first 8 hex of the config hash>`.
    pub fn create(command: &str, argv: &[String], cfg: &RunConfig) -> Result<Self> {
        let echo = cfg.to_toml()?;
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(echo.as_bytes());
        let hash = format!("{:x}", h.finalize());
        let now = Utc::now();
        let stem = format!("{command}-{}-{}", now.format("%Y%m%dT%H%M%SZ"), &hash[..8]);
        let mut path = cfg.out_dir.join(&stem);
        let mut k = 1;
        while path.exists() {
            path = cfg.out_dir.join(format!("{stem}-{k}"));
            k += 1;
        }
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let manifest = json!({
            "command": command,
            "argv": argv,
            "seed": cfg.seed,
            "config_sha256": hash,
            "config": serde_json::to_value(cfg)?,
            "git_describe": git_describe(),
            "version": env!("CARGO_PKG_VERSION"),
            "started_utc": now.to_rfc3339(),
        });
        fs::write(path.join("config.toml"), echo)?;
        let run = Self { path, manifest, started: Instant::now() };
        run.write_manifest()?;
        Ok(run)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn write_manifest(&self) -> Result<()> {
        fs::write(self.path.join("manifest.json"), serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }

    /// Record the outcome and elapsed time.
    pub fn finish(mut self, summary: &str, outputs: &[PathBuf]) -> Result<PathBuf> {
        let rel: Vec<String> = outputs.iter().map(|p| relative(p, &self.path)).collect();
        self.manifest["summary"] = json!(summary);
        self.manifest["outputs"] = json!(rel);
        self.manifest["elapsed_s"] = json!(self.started.elapsed().as_secs_f64());
        self.write_manifest()?;
        Ok(self.path)
    }

    pub fn fail(mut self, error: &str) -> Result<()> {
        self.manifest["error"] = json!(error);
        self.manifest["elapsed_s"] = json!(self.started.elapsed().as_secs_f64());
        self.write_manifest()
    }
}

fn relative(p: &Path, base: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).display().to_string()
}
