//! On-disk cache of coset representatives: versioned JSON, single writer, atomic replace.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};

use crate::arith::ResRing;
use crate::error::{Error, Result};
use crate::matgroup::{CosetSpace, ResMat, Subgroup};

pub const CACHE_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "GGPLAB_CACHE_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CosetFile {
    version: u32,
    key: String,
    n: usize,
    p: u64,
    level: u32,
    entries: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub bytes: u64,
}

#[derive(Clone, Debug)]
pub struct Cache {
    pub dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    /// `GGPLAB_CACHE_DIR`, then the explicit directory, then `$XDG_CACHE_HOME/ggplab`,
    /// `$HOME/.cache/ggplab`, `./.ggplab-cache`.
    pub fn resolve(explicit: Option<&Path>) -> Self {
        if let Some(d) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return Cache::new(d);
        }
        if let Some(d) = explicit {
            return Cache::new(d);
        }
        if let Some(d) = std::env::var_os("XDG_CACHE_HOME").filter(|d| !d.is_empty()) {
            return Cache::new(PathBuf::from(d).join("ggplab"));
        }
        if let Some(h) = std::env::var_os("HOME").filter(|d| !d.is_empty()) {
            return Cache::new(PathBuf::from(h).join(".cache").join("ggplab"));
        }
        Cache::new(".ggplab-cache")
    }

    fn path_for(&self, key: &str) -> PathBuf {
        let name: String = key
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect();
        self.dir.join(format!("{name}.json"))
    }

    pub fn read_raw(&self, key: &str) -> Result<Option<String>> {
        match fs::read_to_string(self.path_for(key)) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::Cache(e.to_string())),
        }
    }

    /// Writes `contents` under the directory lock via a temp file and rename.
    pub fn write_raw(&self, key: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::Cache(e.to_string()))?;
        let _lock = DirLock::acquire(&self.dir)?;
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        fs::write(&tmp, contents).map_err(|e| Error::Cache(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| Error::Cache(e.to_string()))
    }

    /// Coset space from disk, or built and stored on a miss or version mismatch.
    pub fn coset_space(
        &self,
        n: usize,
        p: u64,
        ambient: &Subgroup,
        sub: &Subgroup,
        level: u32,
        budget: u128,
    ) -> Result<CosetSpace> {
        let key = CosetSpace::cache_key(n, p, ambient, sub, level);
        if let Some(raw) = self.read_raw(&key)? {
            if let Ok(f) = serde_json::from_str::<CosetFile>(&raw) {
                if f.version == CACHE_VERSION && f.key == key && f.n == n && f.p == p && f.level == level {
                    let ring = ResRing::new(p, level)?;
                    let reps = f
                        .entries
                        .iter()
                        .map(|e| {
                            if e.len() != n * n {
                                return Err(Error::Cache(format!("{key}: bad entry length")));
                            }
                            Ok(ResMat::from_fn(n, ring, |i, j| e[i * n + j] as i128))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    return CosetSpace::from_reps(n, p, ambient, sub, level, reps, budget);
                }
            }
        }
        let space = CosetSpace::build(n, p, ambient, sub, level, budget)?;
        let file = CosetFile {
            version: CACHE_VERSION,
            key: key.clone(),
            n,
            p,
            level,
            entries: space.reps.iter().map(|r| r.entries().iter().map(|&e| e as u64).collect()).collect(),
        };
        let json = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
        self.write_raw(&key, &json)?;
        Ok(space)
    }

    pub fn list(&self) -> Result<Vec<CacheEntry>> {
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::Cache(e.to_string())),
        };
        let mut out = Vec::new();
        for ent in rd {
            let ent = ent.map_err(|e| Error::Cache(e.to_string()))?;
            let path = ent.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = ent.metadata().map(|m| m.len()).unwrap_or(0);
            let key = fs::read_to_string(&path)
                .ok()
                .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
                .and_then(|v| v.get("key").and_then(|k| k.as_str()).map(str::to_string))
                .unwrap_or_else(|| path.file_stem().unwrap_or_default().to_string_lossy().into_owned());
            out.push(CacheEntry { key, bytes });
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }

    /// Removes every cache file; returns how many were deleted.
    pub fn clear(&self) -> Result<usize> {
        if !self.dir.exists() {
            return Ok(0);
        }
        let _lock = DirLock::acquire(&self.dir)?;
        let mut removed = 0;
        for ent in fs::read_dir(&self.dir).map_err(|e| Error::Cache(e.to_string()))? {
            let path = ent.map_err(|e| Error::Cache(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                fs::remove_file(&path).map_err(|e| Error::Cache(e.to_string()))?;
                removed += 1;
            }
        }
        Ok(removed)
    }
}

struct DirLock {
    path: PathBuf,
}

impl DirLock {
    const STALE: Duration = Duration::from_secs(300);

    fn acquire(dir: &Path) -> Result<DirLock> {
        let path = dir.join(".lock");
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(_) => return Ok(DirLock { path }),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let stale = fs::metadata(&path)
                        .and_then(|m| m.modified())
                        .ok()
                        .and_then(|t| SystemTime::now().duration_since(t).ok())
                        .is_some_and(|age| age > Self::STALE);
                    if stale {
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    if start.elapsed() > Duration::from_secs(30) {
                        return Err(Error::Cache(format!("cache lock {} is held", path.display())));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(Error::Cache(e.to_string())),
            }
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_list_clear() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        assert!(c.list().unwrap().is_empty());
        let a = c.coset_space(2, 3, &Subgroup::K, &Subgroup::TorusTilde(1), 1, 1 << 20).unwrap();
        assert_eq!(a.len(), 12);
        let b = c.coset_space(2, 3, &Subgroup::K, &Subgroup::TorusTilde(1), 1, 1 << 20).unwrap();
        assert_eq!(a.reps, b.reps);
        for g in &a.reps {
            assert_eq!(b.coset_of(g), a.coset_of(g));
        }
        let l = c.list().unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].key, "cosets/n2-p3-K-Tt1-L1");
        assert_eq!(c.clear().unwrap(), 1);
        assert!(c.list().unwrap().is_empty());
    }

    #[test]
    fn corrupt_file_is_rebuilt() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        let key = CosetSpace::cache_key(2, 3, &Subgroup::K, &Subgroup::TorusTilde(1), 1);
        c.write_raw(&key, "{not json").unwrap();
        let a = c.coset_space(2, 3, &Subgroup::K, &Subgroup::TorusTilde(1), 1, 1 << 20).unwrap();
        assert_eq!(a.len(), 12);
        assert!(c.read_raw(&key).unwrap().unwrap().contains("\"version\":1"));
    }
}
