//! Content-addressed result cache.
//!
//! Entries live under `<out>/cache/<key>.json` where `key` is the SHA-256 of
//! the inputs that determine the result: tool version, model content hash,
//! and the fully resolved parameter echo. The stored payload is the exact
//! byte string of the rendered output document, together with its own
//! SHA-256 checksum, so
//!
//! * a cache hit reproduces the output file byte for byte,
//! * tampering is detected by the checksum,
//! * `--verify-cache` recomputes anyway and fails loudly if the stored and
//!   recomputed bytes differ in any way.
//!
//! Because hits replay the same bytes a fresh computation would produce,
//! result files are identical whether or not the cache was warm.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    /// SHA-256 of `payload`, hex.
    checksum: String,
    payload: String,
}

pub struct RunCache {
    dir: PathBuf,
    /// Recompute even on hits and insist the bytes match.
    pub verify: bool,
}

/// What `get_or_compute` did, for summary lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Miss,
    Hit,
    Verified,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

impl RunCache {
    pub fn new(out_dir: &Path, verify: bool) -> Result<Self, CliError> {
        let dir = out_dir.join("cache");
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::msg(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunCache { dir, verify })
    }

    /// Key for a result: hash of everything that determines it.
    pub fn key(model_hash: &str, echo: &str) -> String {
        sha256_hex(format!("ldp {}\n{model_hash}\n{echo}", env!("CARGO_PKG_VERSION")).as_bytes())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Look up `key` without computing. Corrupt entries error in verify
    /// mode and read as a miss (to be repaired by `store`) otherwise.
    pub fn peek(&self, key: &str) -> Result<Option<String>, CliError> {
        let path = self.entry_path(key);
        match fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str::<Entry>(&text) {
                Ok(e) if e.key == key && e.checksum == sha256_hex(e.payload.as_bytes()) => {
                    Ok(Some(e.payload))
                }
                _ if self.verify => Err(CliError::msg(format!(
                    "cache entry {key}.json is corrupted (checksum mismatch) in {}",
                    self.dir.display()
                ))),
                _ => Ok(None),
            },
            Err(_) => Ok(None),
        }
    }

    /// Store `payload` under `key`, overwriting any previous entry.
    pub fn store(&self, key: &str, payload: &str) -> Result<(), CliError> {
        let path = self.entry_path(key);
        let entry = Entry {
            key: key.to_string(),
            checksum: sha256_hex(payload.as_bytes()),
            payload: payload.to_string(),
        };
        let text = serde_json::to_string(&entry)
            .map_err(|e| CliError::msg(format!("cache serialization: {e}")))?;
        fs::write(&path, text)
            .map_err(|e| CliError::msg(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }

    /// Return the cached payload for `key`, or compute, store, and return
    /// it. Corrupt entries fail in verify mode and are recomputed (and
    /// repaired) otherwise.
    pub fn get_or_compute(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<String, CliError>,
    ) -> Result<(String, CacheOutcome), CliError> {
        match self.peek(key)? {
            Some(payload) if !self.verify => Ok((payload, CacheOutcome::Hit)),
            Some(payload) => {
                let fresh = compute()?;
                if fresh != payload {
                    return Err(CliError::msg(format!(
                        "cache entry {key}.json does not match recomputation in {}",
                        self.dir.display()
                    )));
                }
                Ok((fresh, CacheOutcome::Verified))
            }
            None => {
                let payload = compute()?;
                self.store(key, &payload)?;
                Ok((payload, CacheOutcome::Miss))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn hit_replays_the_exact_bytes() {
        let dir = tmp();
        let cache = RunCache::new(dir.path(), false).unwrap();
        let key = RunCache::key("abc", "run --p 0.7");
        let (first, o1) = cache
            .get_or_compute(&key, || Ok("payload v1\n".into()))
            .unwrap();
        assert_eq!(o1, CacheOutcome::Miss);
        // a different closure result must NOT leak through on a hit
        let (second, o2) = cache
            .get_or_compute(&key, || Ok("payload v2\n".into()))
            .unwrap();
        assert_eq!(o2, CacheOutcome::Hit);
        assert_eq!(first, second);
    }

    #[test]
    fn verify_mode_detects_tampering() {
        let dir = tmp();
        let key = RunCache::key("abc", "run --p 0.7");
        {
            let cache = RunCache::new(dir.path(), false).unwrap();
            cache.get_or_compute(&key, || Ok("honest\n".into())).unwrap();
        }
        // flip payload bytes without fixing the checksum
        let path = dir.path().join("cache").join(format!("{key}.json"));
        let tampered = fs::read_to_string(&path).unwrap().replace("honest", "forged");
        fs::write(&path, tampered).unwrap();

        let cache = RunCache::new(dir.path(), true).unwrap();
        let err = cache
            .get_or_compute(&key, || Ok("honest\n".into()))
            .unwrap_err()
            .to_string();
        assert!(err.contains(&format!("{key}.json")), "names the entry: {err}");
        assert!(err.contains("corrupted"), "got: {err}");
    }

    #[test]
    fn verify_mode_detects_stale_results() {
        let dir = tmp();
        let key = RunCache::key("abc", "run");
        let cache = RunCache::new(dir.path(), false).unwrap();
        cache.get_or_compute(&key, || Ok("old\n".into())).unwrap();

        let cache = RunCache::new(dir.path(), true).unwrap();
        // consistent entry, but recomputation now disagrees
        let err = cache
            .get_or_compute(&key, || Ok("new\n".into()))
            .unwrap_err()
            .to_string();
        assert!(err.contains("does not match recomputation"), "got: {err}");

        let (ok, outcome) = cache.get_or_compute(&key, || Ok("old\n".into())).unwrap();
        assert_eq!(ok, "old\n");
        assert_eq!(outcome, CacheOutcome::Verified);
    }
}
