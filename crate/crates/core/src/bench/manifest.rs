//! Run manifests: what ran, with which resolved configuration, and a digest of
//! every file it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// Fully resolved configuration as TOML; replaying feeds it back unchanged.
    pub config: String,
    pub out_dir: String,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock measurements such as throughput; not reproducible, not artifacts.
    #[serde(default)]
    pub measurements: BTreeMap<String, f64>,
    pub started: String,
    pub finished: String,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

pub fn artifacts(out_dir: &Path, files: &[PathBuf]) -> Result<Vec<Artifact>> {
    let mut out: Vec<Artifact> = files
        .iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(&out_dir.join(f))?;
            Ok(Artifact {
                path: f.to_string_lossy().replace('\\', "/"),
                sha256,
                bytes,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    out.dedup_by(|a, b| a.path == b.path);
    Ok(out)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format("manifest", e.to_string()))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(Error::format(
                "manifest",
                format!("version {} is not supported", m.manifest_version),
            ));
        }
        Ok(m)
    }

    /// Artifacts whose digest differs from `other` (or that are missing in it).
    pub fn mismatches(&self, other: &RunManifest) -> Vec<String> {
        let theirs: BTreeMap<&str, &Artifact> = other.artifacts.iter().map(|a| (a.path.as_str(), a)).collect();
        let mut bad: Vec<String> = self
            .artifacts
            .iter()
            .filter(|a| theirs.get(a.path.as_str()).is_none_or(|b| b.sha256 != a.sha256))
            .map(|a| a.path.clone())
            .collect();
        let ours: Vec<&str> = self.artifacts.iter().map(|a| a.path.as_str()).collect();
        bad.extend(other.artifacts.iter().filter(|a| !ours.contains(&a.path.as_str())).map(|a| a.path.clone()));
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_and_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "abc").unwrap();
        let arts = artifacts(dir.path(), &[PathBuf::from("a.txt")]).unwrap();
        assert_eq!(arts[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let m = RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: "eval".into(),
            tool_version: "0".into(),
            seed: 1,
            config: String::new(),
            out_dir: ".".into(),
            artifacts: arts,
            measurements: BTreeMap::new(),
            started: now(),
            finished: now(),
        };
        assert!(m.mismatches(&m).is_empty());
        let mut other = m.clone();
        other.artifacts[0].sha256 = "00".into();
        assert_eq!(m.mismatches(&other), vec!["a.txt".to_string()]);
        let p = m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&p).unwrap(), m);
    }
}
