//! Output directory, property checks and the experiment manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

use crate::config::{Resolved, DIALECT};

/// One acceptance property: measured value against its threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: threshold.into(),
            pass,
        }
    }

    /// `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {limit:e}"), value <= limit)
    }

    /// `value ≥ limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!(">= {limit:e}"), value >= limit)
    }

    pub fn within(name: impl Into<String>, value: f64, window: [f64; 2]) -> Self {
        let pass = value >= window[0] && value <= window[1];
        Self::new(name, value, format!("in [{}, {}]", window[0], window[1]), pass)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// `git`-style content hash: SHA-256 over `blob <len>\0<bytes>`.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// The configured output directory; every file goes directly inside it.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            bail!("output name {name:?} must be a plain file name");
        }
        if !self.written.iter().any(|n| n == name) {
            self.written.push(name.to_string());
        }
        Ok(self.root.join(name))
    }

    /// Writes one file through a buffered writer.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let path = self.path(name)?;
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes a CSV table with a header row.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.write(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for r in rows {
                c.write_record(r)?;
            }
            c.flush()?;
            Ok(())
        })
    }

    pub fn checks(&mut self, checks: &[Check]) -> Result<()> {
        let rows: Vec<Vec<String>> = checks
            .iter()
            .map(|c| vec![c.name.clone(), num(c.value), c.threshold.clone(), c.pass.to_string()])
            .collect();
        self.csv("checks.csv", &["check", "value", "threshold", "pass"], &rows)
    }

    /// Writes `manifest.txt`: tool, subcommand, dialect, input hashes, a
    /// timestamp line, the hash of every file written so far, and the
    /// canonical configuration.
    pub fn manifest(&mut self, subcommand: &str, resolved: &Resolved) -> Result<()> {
        let mut files = Vec::new();
        for name in &self.written {
            let bytes = fs::read(self.root.join(name))?;
            files.push((name.clone(), blob_hash(&bytes)));
        }
        files.sort();
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut text = String::new();
        text.push_str(&format!("tool = \"fracpm {}\"\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("subcommand = \"{subcommand}\"\n"));
        text.push_str(&format!("config_dialect = \"{DIALECT}\"\n"));
        text.push_str(&format!("config_hash = \"{}\"\n", blob_hash(resolved.canonical.as_bytes())));
        if let Some(bytes) = &resolved.table_bytes {
            text.push_str(&format!("table_hash = \"{}\"\n", blob_hash(bytes)));
        }
        text.push_str(&format!("timestamp = {stamp}\n"));
        text.push_str("\n[outputs]\n");
        for (name, hash) in &files {
            text.push_str(&format!("\"{name}\" = \"{hash}\"\n"));
        }
        text.push_str("\n# canonical configuration\n");
        for line in resolved.canonical.lines() {
            text.push_str(&format!("# {line}\n"));
        }
        let path = self.root.join("manifest.txt");
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

/// Shortest round-trip decimal form, so outputs are byte-stable.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_for_empty_and_text() {
        // sha256 of "blob 0\0" and of "blob 6\0hello\n"
        assert_eq!(blob_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
        assert_eq!(blob_hash(b"hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
    }

    #[test]
    fn names_cannot_escape_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        assert!(out.write("../x", |_| Ok(())).is_err());
        assert!(out.write("a/b", |_| Ok(())).is_err());
        out.write("ok.csv", |w| Ok(w.write_all(b"x")?)).unwrap();
        assert_eq!(fs::read(dir.path().join("ok.csv")).unwrap(), b"x");
    }

    #[test]
    fn check_builders() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_least("b", 0.5, 1.0).pass);
        assert!(Check::within("c", 0.5, [0.2, 0.8]).pass);
        assert!(!Check::within("c", 0.9, [0.2, 0.8]).pass);
    }
}
