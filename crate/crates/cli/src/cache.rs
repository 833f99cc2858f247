//! Content-addressed store for computed output tables.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// Cache key: SHA-256 over the canonical pair text, `α`, the tolerance and
/// whatever else shapes the output (`extra`). Floats enter by bit pattern.
pub fn key(pair_text: &str, alpha: f64, tol: f64, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(pair_text.as_bytes());
    h.update([0u8]);
    h.update(alpha.to_bits().to_le_bytes());
    h.update(tol.to_bits().to_le_bytes());
    h.update(extra.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.csv"))
    }

    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        fs::read(self.path(key)).ok()
    }

    /// Writes through a temporary file so readers never see a partial entry.
    pub fn put(&self, key: &str, bytes: &[u8]) -> io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!("{key}.tmp{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, self.path(key))
    }

    /// Cached bytes for `key`, computing and storing them on a miss.
    pub fn get_or_compute<E, F>(&self, key: &str, compute: F) -> Result<(Vec<u8>, bool), E>
    where
        F: FnOnce() -> Result<Vec<u8>, E>,
        E: From<io::Error>,
    {
        if let Some(b) = self.get(key) {
            return Ok((b, true));
        }
        let b = compute()?;
        self.put(key, &b)?;
        Ok((b, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_every_input() {
        let k = key("p", 1.0, 1e-12, "");
        assert_ne!(k, key("q", 1.0, 1e-12, ""));
        assert_ne!(k, key("p", 2.0, 1e-12, ""));
        assert_ne!(k, key("p", 1.0, 1e-10, ""));
        assert_ne!(k, key("p", 1.0, 1e-12, "x"));
        assert_eq!(k, key("p", 1.0, 1e-12, ""));
    }

    #[test]
    fn stores_and_returns_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        let (b, hit) = c.get_or_compute::<io::Error, _>("k", || Ok(b"a,b\n".to_vec())).unwrap();
        assert!(!hit);
        let (b2, hit2) = c.get_or_compute::<io::Error, _>("k", || Ok(b"other".to_vec())).unwrap();
        assert!(hit2);
        assert_eq!(b, b2);
    }
}
