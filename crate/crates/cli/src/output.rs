//! Report envelopes and atomic file output.

use crate::config::ExperimentConfig;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Deterministic part of every report: same config and seed, same bytes.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub pass: bool,
    pub results: T,
}

/// Run metadata, kept out of the report so the report stays reproducible.
#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub report: &'a str,
    pub config_hash: String,
    pub tool_version: &'static str,
    pub unix_time: u64,
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Files produced under `--out`.
pub struct OutDir(pub Option<PathBuf>);

impl OutDir {
    pub fn write(&self, name: &str, contents: &str) -> std::io::Result<()> {
        match &self.0 {
            Some(dir) => write_atomic(&dir.join(name), contents.as_bytes()),
            None => Ok(()),
        }
    }

    /// `<command>.json` plus `<command>.meta.json`; prints the report to
    /// stdout when there is no output directory.
    pub fn report<T: Serialize>(&self, cfg: &ExperimentConfig, pass: bool, results: T) -> std::io::Result<String> {
        let env = Envelope {
            command: &cfg.command,
            config_hash: cfg.hash(),
            seed: cfg.seed,
            config: cfg,
            pass,
            results,
        };
        let json = serde_json::to_string_pretty(&env).expect("reports serialize") + "\n";
        let name = format!("{}.json", cfg.command);
        if self.0.is_some() {
            self.write(&name, &json)?;
            let meta = Metadata {
                report: &name,
                config_hash: cfg.hash(),
                tool_version: env!("CARGO_PKG_VERSION"),
                unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            };
            self.write(
                &format!("{}.meta.json", cfg.command),
                &(serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"),
            )?;
        }
        Ok(json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/r.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let names: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
