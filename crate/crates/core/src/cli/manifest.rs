use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    /// Artifact file name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
    /// Artifacts of earlier stages this stage read.
    #[serde(default)]
    pub inputs: Vec<String>,
}

/// Run record kept in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub crate_version: String,
    /// Hash of the configuration used by the most recent stage.
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl Manifest {
    pub fn load_or_new(dir: &Path, config_hash: &str) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        Ok(Manifest {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            stages: BTreeMap::new(),
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::Usage(format!("no {MANIFEST_FILE} in {}; run a stage first", dir.display())));
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(&path)?)?)
    }

    /// Records a finished stage, hashing each of its artifacts in `dir`.
    pub fn record(&mut self, dir: &Path, stage: &str, config_hash: &str, artifacts: &[&str], inputs: &[&str]) -> Result<()> {
        let mut map = BTreeMap::new();
        for a in artifacts {
            map.insert(a.to_string(), file_digest(&dir.join(a))?);
        }
        // drop other writers of these files and, transitively, their readers
        let mut stale: Vec<String> = map.keys().cloned().collect();
        self.stages.remove(stage);
        loop {
            let hit: Vec<String> = self
                .stages
                .iter()
                .filter(|(_, r)| r.artifacts.keys().chain(&r.inputs).any(|f| stale.contains(f)))
                .map(|(n, _)| n.clone())
                .collect();
            if hit.is_empty() {
                break;
            }
            for n in hit {
                let rec = self.stages.remove(&n).expect("listed above");
                log::info!("stage {n} is out of date and was dropped from the manifest");
                stale.extend(rec.artifacts.into_keys());
            }
        }
        self.stages.insert(
            stage.to_string(),
            StageRecord {
                config_hash: config_hash.to_string(),
                artifacts: map,
                inputs: inputs.iter().map(|s| s.to_string()).collect(),
            },
        );
        self.config_hash = config_hash.to_string();
        self.crate_version = env!("CARGO_PKG_VERSION").to_string();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Stage that wrote `artifact`, if any.
    pub fn producer(&self, artifact: &str) -> Option<&str> {
        self.stages
            .iter()
            .find(|(_, r)| r.artifacts.contains_key(artifact))
            .map(|(n, _)| n.as_str())
    }

    /// Every recorded stage must share one config hash and every artifact
    /// must still hash to its recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for (name, rec) in &self.stages {
            if rec.config_hash != self.config_hash {
                return Err(Error::Usage(format!(
                    "stage {name} ran with config {} but the chain is at {}; rerun it",
                    short(&rec.config_hash),
                    short(&self.config_hash)
                )));
            }
            for (file, digest) in &rec.artifacts {
                let path = dir.join(file);
                let now = file_digest(&path).map_err(|_| Error::Usage(format!("artifact {file} of stage {name} is missing")))?;
                if &now != digest {
                    return Err(Error::Usage(format!("artifact {file} changed since stage {name} wrote it")));
                }
            }
        }
        Ok(())
    }
}

pub fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_detects_mismatch_and_tampering() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "1").unwrap();
        std::fs::write(dir.path().join("b.json"), "2").unwrap();
        let mut m = Manifest::load_or_new(dir.path(), "h1").unwrap();
        m.record(dir.path(), "one", "h1", &["a.csv"], &[]).unwrap();
        m.record(dir.path(), "two", "h1", &["b.json"], &["a.csv"]).unwrap();
        assert!(Manifest::load(dir.path()).unwrap().verify(dir.path()).is_ok());
        std::fs::write(dir.path().join("a.csv"), "3").unwrap();
        assert!(matches!(m.verify(dir.path()), Err(Error::Usage(_))));
        assert_eq!(m.producer("b.json"), Some("two"));
        std::fs::write(dir.path().join("c.json"), "4").unwrap();
        m.record(dir.path(), "three", "h1", &["c.json"], &[]).unwrap();
        // rerunning "one" drops its reader "two" but keeps unrelated "three"
        m.record(dir.path(), "one", "h2", &["a.csv"], &[]).unwrap();
        assert_eq!(m.stages.keys().collect::<Vec<_>>(), ["one", "three"]);
        assert!(matches!(m.verify(dir.path()), Err(Error::Usage(_))));
    }
}
