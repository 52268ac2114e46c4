//! Run directories: creation rules and the files that make a run reproducible.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ices::config::IcesConfig;
use ices::Error;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Creates `dir`, refusing to reuse a non-empty one unless `force` is set,
/// in which case its contents are removed first.
pub fn prepare(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(
                Error::config(format!("{} exists and is not a directory", dir.display())).into(),
            );
        }
        let occupied = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if occupied {
            if !force {
                return Err(Error::config(format!(
                    "{} is not empty; pass --force to replace it",
                    dir.display()
                ))
                .into());
            }
            fs::remove_dir_all(dir).with_context(|| format!("removing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct Input {
    /// `null` for the copy built into the binary.
    path: Option<PathBuf>,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    argv: Vec<String>,
    seeds: &'a [u64],
    config_file: Option<Input>,
    day: Input,
    topology: Input,
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<Value>,
}

/// Everything a run needs written next to its results.
pub struct Provenance<'a> {
    pub command: &'a str,
    pub config_file: Option<&'a Path>,
    pub extra: Option<Value>,
}

/// Writes `config.toml` (the resolved configuration) and `metadata.json`.
pub fn write_metadata(
    dir: &Path,
    cfg: &IcesConfig,
    seeds: &[u64],
    prov: &Provenance,
) -> Result<()> {
    fs::write(dir.join("config.toml"), cfg.to_toml()?)
        .with_context(|| format!("writing {}", dir.display()))?;
    let config_file = match prov.config_file {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Some(Input {
                path: Some(p.to_path_buf()),
                sha256: sha256(&bytes),
            })
        }
        None => None,
    };
    let meta = Metadata {
        command: prov.command,
        version: env!("CARGO_PKG_VERSION"),
        argv: std::env::args().collect(),
        seeds,
        config_file,
        day: Input {
            path: cfg.run.day.clone(),
            sha256: sha256(cfg.day_text()?.as_bytes()),
        },
        topology: Input {
            path: cfg.run.topology.clone(),
            sha256: sha256(cfg.topology_text()?.as_bytes()),
        },
        config: serde_json::to_value(cfg)?,
        extra: prov.extra.clone(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(dir.join("metadata.json"), text + "\n")
        .with_context(|| format!("writing {}", dir.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepare_refuses_occupied_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        prepare(&dir, false).unwrap();
        prepare(&dir, false).unwrap();
        fs::write(dir.join("x"), "1").unwrap();
        assert!(prepare(&dir, false).is_err());
        prepare(&dir, true).unwrap();
        assert!(!dir.join("x").exists());
    }

    #[test]
    fn digest() {
        assert_eq!(
            sha256(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
