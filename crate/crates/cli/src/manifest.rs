use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, Command};

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    quick: bool,
    /// SHA-256 of the resolved config serialized as compact JSON.
    config_sha256: String,
    config: &'a ExperimentConfig,
    versions: BTreeMap<&'a str, &'a str>,
    /// Output file name to SHA-256 of its contents.
    files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn write(cfg: &ExperimentConfig, command: Command, quick: bool, files: &[String]) -> Result<(), CliError> {
    let canonical = serde_json::to_vec(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    let mut hashes = BTreeMap::new();
    for name in files {
        let bytes = std::fs::read(cfg.out.join(name))?;
        hashes.insert(name.clone(), sha256_hex(&bytes));
    }
    let versions = BTreeMap::from([("ct", env!("CARGO_PKG_VERSION")), ("nlct", nlct::VERSION)]);
    let manifest = Manifest {
        command: command.name(),
        seed: cfg.seed,
        quick,
        config_sha256: sha256_hex(&canonical),
        config: cfg,
        versions,
        files: hashes,
    };
    let path = cfg.out.join(format!("manifest_{}.json", command.name()));
    nlct::io::write_json(&path, &manifest)?;
    Ok(())
}
