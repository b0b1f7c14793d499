//! Directory-tree persistence for runs and memoized stage outputs.
//!
//! ```text
//! <root>/runs/<run_id>/manifest.json
//! <root>/runs/<run_id>/config.json
//! <root>/runs/<run_id>/regions.geojson
//! <root>/runs/<run_id>/layers/<name>.json
//! <root>/runs/<run_id>/regions/<gid>/...
//! <root>/cache/<stage>/<key>/...
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Scenario;
use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content digest of a file.
pub fn digest_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::file(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest over the names and contents of the regular files directly in `dir`.
pub fn digest_dir(dir: &Path) -> Result<String> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    let mut hasher = Sha256::new();
    for p in names {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(digest_file(&p)?.as_bytes());
        hasher.update([b'\n']);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of a value's JSON serialization.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    sha256_hex(serde_json::to_string(value).expect("serializable").as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionStatus {
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub gid: String,
    pub status: RegionStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    /// Stage name to memo key.
    #[serde(default)]
    pub stages: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub name: String,
    pub scenario: Scenario,
    pub status: RunStatus,
    pub regions: Vec<RegionRecord>,
    pub module_versions: BTreeMap<String, String>,
    pub input_digests: BTreeMap<String, String>,
    pub layers: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
    #[serde(default)]
    pub cache_hits: usize,
    #[serde(default)]
    pub cache_misses: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl RunManifest {
    /// Moves to `next`; transitions only go forward.
    pub fn advance(&mut self, next: RunStatus) -> Result<()> {
        let ok = matches!(
            (self.status, next),
            (RunStatus::Pending, RunStatus::Running)
                | (RunStatus::Running, RunStatus::Done)
                | (RunStatus::Running, RunStatus::Failed)
                | (RunStatus::Pending, RunStatus::Failed)
        );
        if !ok {
            return Err(Error::invalid(format!("run status cannot go from {:?} to {next:?}", self.status)));
        }
        self.status = next;
        self.updated_at = now();
        Ok(())
    }

    pub fn region(&self, gid: &str) -> Option<&RegionRecord> {
        self.regions.iter().find(|r| r.gid == gid)
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && s.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store> {
        let root = root.into();
        for sub in ["runs", "cache"] {
            let d = root.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::file(&d, e))?;
        }
        Ok(Store { root })
    }

    /// Root from `ATLAS_STORE`, else `./atlas-store`.
    pub fn from_env() -> Result<Store> {
        Store::open(std::env::var_os("ATLAS_STORE").map_or_else(|| PathBuf::from("atlas-store"), PathBuf::from))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> Result<PathBuf> {
        if !valid_name(run_id) {
            return Err(Error::NotFound(format!("run {run_id}")));
        }
        Ok(self.root.join("runs").join(run_id))
    }

    pub fn has_run(&self, run_id: &str) -> bool {
        self.run_dir(run_id).map(|d| d.join("manifest.json").is_file()).unwrap_or(false)
    }

    pub fn read_manifest(&self, run_id: &str) -> Result<RunManifest> {
        let path = self.run_dir(run_id)?.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|_| Error::NotFound(format!("run {run_id}")))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(m)?;
        write_atomic(&self.run_dir(&m.run_id)?.join("manifest.json"), &bytes)
    }

    /// All manifests, oldest first.
    pub fn list_runs(&self) -> Result<Vec<RunManifest>> {
        let dir = self.root.join("runs");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::file(&dir, e))? {
            let entry = entry?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if let Ok(m) = self.read_manifest(&id) {
                out.push(m);
            }
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.run_id.cmp(&b.run_id)));
        Ok(out)
    }

    pub fn write_run_file(&self, run_id: &str, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.run_dir(run_id)?.join(rel), bytes)
    }

    pub fn read_run_file(&self, run_id: &str, rel: &str) -> Result<Vec<u8>> {
        if rel.split('/').any(|p| !valid_name(p)) {
            return Err(Error::NotFound(rel.to_string()));
        }
        let path = self.run_dir(run_id)?.join(rel);
        fs::read(&path).map_err(|_| Error::NotFound(format!("{run_id}/{rel}")))
    }

    /// Directory of a memoized stage output.
    pub fn memo_dir(&self, stage: &str, key: &str) -> PathBuf {
        self.root.join("cache").join(stage).join(key)
    }

    pub fn memo_get<T: DeserializeOwned>(&self, stage: &str, key: &str) -> Option<T> {
        let path = self.memo_dir(stage, key).join("output.json");
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn memo_put<T: Serialize>(&self, stage: &str, key: &str, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec(value)?;
        write_atomic(&self.memo_dir(stage, key).join("output.json"), &bytes)
    }

    pub fn memo_write(&self, stage: &str, key: &str, file: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.memo_dir(stage, key).join(file), bytes)
    }

    /// Digest of every file under the store, for side-effect checks.
    pub fn tree_digest(&self) -> Result<String> {
        fn walk(dir: &Path, base: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
            let mut entries: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| Error::file(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            entries.sort();
            for p in entries {
                if p.is_dir() {
                    walk(&p, base, out)?;
                } else {
                    let rel = p.strip_prefix(base).unwrap_or(&p).to_string_lossy().into_owned();
                    out.push((rel, digest_file(&p)?));
                }
            }
            Ok(())
        }
        let mut files = Vec::new();
        walk(&self.root, &self.root, &mut files)?;
        Ok(digest_json(&files))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::water::{Case, Rcp};

    fn manifest(id: &str) -> RunManifest {
        RunManifest {
            run_id: id.into(),
            name: "t".into(),
            scenario: Scenario {
                year: 2030,
                rcp: Rcp::Rcp26,
                case: Case::Medium,
            },
            status: RunStatus::Pending,
            regions: vec![],
            module_versions: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            layers: vec![],
            created_at: now(),
            updated_at: now(),
            cache_hits: 0,
            cache_misses: 0,
            error: None,
        }
    }

    #[test]
    fn manifest_round_trip_and_transitions() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut m = manifest("abc123");
        store.write_manifest(&m).unwrap();
        assert_eq!(store.read_manifest("abc123").unwrap(), m);
        assert!(m.advance(RunStatus::Done).is_err());
        m.advance(RunStatus::Running).unwrap();
        m.advance(RunStatus::Done).unwrap();
        assert!(m.advance(RunStatus::Running).is_err());
        assert!(matches!(store.read_manifest("nope"), Err(Error::NotFound(_))));
        assert!(matches!(store.read_manifest("../x"), Err(Error::NotFound(_))));
        assert_eq!(store.list_runs().unwrap().len(), 1);
    }

    #[test]
    fn memo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.memo_get::<Vec<f64>>("s", "k").is_none());
        store.memo_put("s", "k", &vec![0.1, 0.2]).unwrap();
        assert_eq!(store.memo_get::<Vec<f64>>("s", "k").unwrap(), vec![0.1, 0.2]);
        let d = store.tree_digest().unwrap();
        assert_eq!(d, store.tree_digest().unwrap());
    }
}
