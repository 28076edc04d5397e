//! Content-addressed store of band solutions.
//!
//! Each entry is a text file `<key>.bands`: a one-line header
//! `twistchan-bands <format> <key> <sha256 of payload>` followed by the JSON
//! payload. The key is the SHA-256 of the canonical JSON of every input the
//! solve depends on. Floats are written in round-trip form, so a hit replays
//! the stored solution bit for bit. Entries that fail any check are moved to
//! `quarantine/` and never reused.

use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bands::{BandSelection, BandSet, BeamModel};
use crate::error::{Error, Result};
use crate::potential::CrystalModel;

const MAGIC: &str = "twistchan-bands";
const FORMAT: u32 = 1;
const EXTENSION: &str = "bands";

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "TWISTCHAN_CACHE_DIR";

#[derive(Serialize)]
struct KeyMaterial<'a> {
    format: u32,
    crystal: &'a CrystalModel,
    beam: &'a BeamModel,
    cutoff: usize,
    k_bar: [f64; 2],
    selection: BandSelection,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Cache key of one band solve.
pub fn cache_key(
    crystal: &CrystalModel,
    beam: &BeamModel,
    cutoff: usize,
    k_bar: [f64; 2],
    selection: BandSelection,
) -> String {
    let material = KeyMaterial {
        format: FORMAT,
        crystal,
        beam,
        cutoff,
        k_bar,
        selection,
    };
    let json = serde_json::to_string(&material).expect("key material serializes");
    sha256_hex(json.as_bytes())
}

/// Summary of one stored entry.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryInfo {
    pub key: String,
    pub k_perp: [f64; 2],
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BandCache {
    dir: PathBuf,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(p) = parent {
        fs::create_dir_all(p)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Cache(format!("'{}' has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

impl BandCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache at `$TWISTCHAN_CACHE_DIR`, falling back to `default`.
    pub fn from_env_or(default: &Path) -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(default),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.{EXTENSION}"))
    }

    fn quarantine(&self, path: &Path, reason: &str) -> Result<()> {
        let qdir = self.dir.join("quarantine");
        fs::create_dir_all(&qdir)?;
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let mut target = qdir.join(&name);
        let mut n = 1;
        while target.exists() {
            target = qdir.join(format!("{name}.{n}"));
            n += 1;
        }
        fs::rename(path, &target)?;
        warn!(
            "[cache] corrupt entry {} quarantined to {}: {reason}",
            path.display(),
            target.display()
        );
        Ok(())
    }

    fn decode(key: &str, text: &str) -> std::result::Result<BandSet, String> {
        let (header, payload) = text.split_once('\n').ok_or("missing header line")?;
        let fields: Vec<&str> = header.split(' ').collect();
        match fields.as_slice() {
            [magic, format, k, sum] => {
                if *magic != MAGIC || *format != FORMAT.to_string() {
                    return Err(format!("unsupported header '{header}'"));
                }
                if *k != key {
                    return Err(format!("header key {k} does not match file name"));
                }
                if *sum != sha256_hex(payload.as_bytes()) {
                    return Err("payload checksum mismatch".into());
                }
            }
            _ => return Err(format!("malformed header '{header}'")),
        }
        let set: BandSet = serde_json::from_str(payload).map_err(|e| e.to_string())?;
        let again = serde_json::to_string(&set).map_err(|e| e.to_string())?;
        if again != payload {
            return Err("payload does not replay exactly".into());
        }
        Ok(set)
    }

    /// Stored solution for `key`, or `None` when absent or corrupt.
    pub fn load(&self, key: &str) -> Result<Option<BandSet>> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let decoded = String::from_utf8(bytes)
            .map_err(|_| "entry is not UTF-8".to_string())
            .and_then(|text| Self::decode(key, &text));
        match decoded {
            Ok(set) => Ok(Some(set)),
            Err(reason) => {
                self.quarantine(&path, &reason)?;
                Ok(None)
            }
        }
    }

    pub fn store(&self, key: &str, set: &BandSet) -> Result<()> {
        let payload = serde_json::to_string(set).map_err(|e| Error::Cache(e.to_string()))?;
        let text = format!(
            "{MAGIC} {FORMAT} {key} {}\n{payload}",
            sha256_hex(payload.as_bytes())
        );
        write_atomic(&self.entry_path(key), text.as_bytes())
    }

    fn keys(&self) -> Result<Vec<String>> {
        let mut keys = Vec::new();
        let rd = match fs::read_dir(&self.dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(keys),
            Err(e) => return Err(e.into()),
        };
        for entry in rd {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some(EXTENSION) {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    keys.push(stem.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    /// Valid entries, sorted by key. Corrupt entries are quarantined.
    pub fn entries(&self) -> Result<Vec<EntryInfo>> {
        let mut out = Vec::new();
        for key in self.keys()? {
            if let Some(set) = self.load(&key)? {
                let mut energies: Vec<f64> = set.states.iter().map(|s| s.energy).collect();
                energies.sort_by(f64::total_cmp);
                out.push(EntryInfo {
                    key,
                    k_perp: set.k_perp,
                    energies,
                });
            }
        }
        Ok(out)
    }

    /// Removes every entry and the quarantine; returns the number of entries removed.
    pub fn purge(&self) -> Result<usize> {
        let keys = self.keys()?;
        for key in &keys {
            fs::remove_file(self.entry_path(key))?;
        }
        let qdir = self.dir.join("quarantine");
        if qdir.exists() {
            fs::remove_dir_all(qdir)?;
        }
        Ok(keys.len())
    }
}
