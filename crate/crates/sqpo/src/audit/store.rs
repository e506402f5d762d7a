//! Durable trail storage.
//!
//! Layout: a directory with `STATE` (the head state in canonical form),
//! `TRAIL` (the per-branch commit arrays), `DELTAS` (the branch deltas),
//! `HEAD` (the current branch name) and `FORMAT` (the store version). All
//! JSON files use canonical key ordering. Historical states are never
//! materialized on disk; the store grows with the number and size of rules,
//! not with the size of the state times the number of commits.
//!
//! Writers take an advisory lock file; concurrent readers are safe.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Commit, State, StoredRewrite, Trail};

pub const FORMAT_VERSION: &str = "sqpo-trail/1";

#[derive(Serialize, Deserialize)]
struct TrailDoc {
    branches: BTreeMap<String, Vec<Commit>>,
}

/// An advisory single-writer lock; released on drop.
pub struct StoreLock {
    path: PathBuf,
}

impl StoreLock {
    pub fn acquire(store: &Path) -> Result<StoreLock> {
        let path = store.join("LOCK");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(StoreLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::StoreLocked(
                format!("{} exists; another writer holds the store", path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes a trail to a store directory, creating it if needed.
pub fn save_trail(trail: &Trail, path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    fs::write(path.join("FORMAT"), FORMAT_VERSION)?;
    fs::write(
        path.join("STATE"),
        serde_json::to_vec(trail.head()).expect("state serialization cannot fail"),
    )?;
    let doc = TrailDoc { branches: trail.lineages().clone() };
    fs::write(path.join("TRAIL"), serde_json::to_vec(&doc).expect("serializable"))?;
    fs::write(
        path.join("DELTAS"),
        serde_json::to_vec(trail.deltas()).expect("serializable"),
    )?;
    fs::write(path.join("HEAD"), trail.current_branch())?;
    Ok(())
}

/// Reads a trail back; `load_trail(save_trail(t)) == t`.
pub fn load_trail(path: &Path) -> Result<Trail> {
    let format = read(path, "FORMAT")?;
    let format = String::from_utf8_lossy(&format);
    if format.trim() != FORMAT_VERSION {
        return Err(Error::VersionMismatch(format!(
            "store has format {:?}, expected {FORMAT_VERSION:?}",
            format.trim()
        )));
    }
    let head: State = parse(path, "STATE", &read(path, "STATE")?)?;
    let doc: TrailDoc = parse(path, "TRAIL", &read(path, "TRAIL")?)?;
    let deltas: BTreeMap<String, StoredRewrite> = parse(path, "DELTAS", &read(path, "DELTAS")?)?;
    let current = String::from_utf8(read(path, "HEAD")?)
        .map_err(|_| Error::StoreCorrupt("HEAD is not valid UTF-8".into()))?;
    Trail::from_parts(head, current.trim().to_string(), doc.branches, deltas)
}

fn read(path: &Path, file: &str) -> Result<Vec<u8>> {
    fs::read(path.join(file))
        .map_err(|e| Error::StoreCorrupt(format!("{}: {e}", path.join(file).display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path, file: &str, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes)
        .map_err(|e| Error::StoreCorrupt(format!("{}: {e}", path.join(file).display())))
}
