//! On-disk cache of structured documents, keyed by source id and checked
//! against the hash of the current source text.
//!
//! Layout under the root:
//!
//! ```text
//! index.json
//! records/ab/cd/abcd....json   (sha256 of the source id)
//! quarantine/
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;
use thiserror::Error;

use crate::doctree::DocTree;
use crate::xml_codec::{roundtrip, RoundtripOutcome, SkipPolicy};

pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("refusing to store {source_id}: {reason}")]
    InvalidTree { source_id: String, reason: String },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructMeta {
    pub model: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub repairs: usize,
}

impl StructMeta {
    pub fn now(model: impl Into<String>, repairs: usize) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { model: model.into(), timestamp, repairs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub source_id: String,
    pub hash: String,
    pub tree: DocTree,
    pub meta: StructMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct IndexEntry {
    hash: String,
    path: String,
    /// sha256 of the record file bytes.
    checksum: String,
    meta: StructMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    Absent,
    Stale,
    Corrupt,
}

#[derive(Debug)]
pub enum StoreLookup {
    Hit(Box<StoreRecord>),
    Miss(MissReason),
}

pub struct CorpusStore {
    root: PathBuf,
    policy: SkipPolicy,
    index: Mutex<BTreeMap<String, IndexEntry>>,
}

impl CorpusStore {
    pub fn open(root: impl Into<PathBuf>, policy: SkipPolicy) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("records"))?;
        fs::create_dir_all(root.join("quarantine"))?;
        let index = match fs::read(root.join("index.json")) {
            Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_else(|e| {
                tracing::warn!(error = %e, "unreadable store index; starting empty");
                BTreeMap::new()
            }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self { root, policy, index: Mutex::new(index) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.index.lock().expect("index lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn relative_path(source_id: &str) -> String {
        let h = content_hash(source_id);
        format!("records/{}/{}/{h}.json", &h[0..2], &h[2..4])
    }

    pub fn record_path(&self, source_id: &str) -> PathBuf {
        self.root.join(Self::relative_path(source_id))
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
        let dir = path.parent().expect("record paths have a parent");
        fs::create_dir_all(dir)?;
        let mut tmp = NamedTempFile::new_in(dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Stores `tree` as the structure of `source_id`. The tree must validate
    /// and survive a serialize/parse/restore roundtrip.
    pub fn put(&self, source_id: &str, tree: &DocTree, meta: StructMeta) -> Result<(), StoreError> {
        let violations = tree.validate();
        if let Some(v) = violations.first() {
            return Err(StoreError::InvalidTree { source_id: source_id.into(), reason: v.to_string() });
        }
        let rt = roundtrip(tree, &self.policy);
        if rt != RoundtripOutcome::Lossless {
            return Err(StoreError::InvalidTree { source_id: source_id.into(), reason: format!("roundtrip: {rt:?}") });
        }
        let record = StoreRecord { source_id: source_id.into(), hash: content_hash(&tree.source_text), tree: tree.clone(), meta };
        let bytes = serde_json::to_vec(&record)?;
        let rel = Self::relative_path(source_id);

        let mut index = self.index.lock().expect("index lock");
        Self::write_atomic(&self.root.join(&rel), &bytes)?;
        index.insert(
            source_id.into(),
            IndexEntry { hash: record.hash, path: rel, checksum: hex::encode(Sha256::digest(&bytes)), meta: record.meta },
        );
        Self::write_atomic(&self.root.join("index.json"), &serde_json::to_vec_pretty(&*index)?)?;
        Ok(())
    }

    /// Looks up `source_id`; a hit requires the stored hash to equal
    /// `text_hash`. Corrupt records are moved to `quarantine/`.
    pub fn get(&self, source_id: &str, text_hash: &str) -> StoreLookup {
        let path = self.record_path(source_id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(_) => return StoreLookup::Miss(MissReason::Absent),
        };
        let expected = self.index.lock().expect("index lock").get(source_id).map(|e| e.checksum.clone());
        let checksum_ok = expected.is_none_or(|c| c == hex::encode(Sha256::digest(&bytes)));
        let record = checksum_ok
            .then(|| serde_json::from_slice::<StoreRecord>(&bytes).ok())
            .flatten()
            .filter(|r| r.source_id == source_id && r.tree.validate().is_empty());
        let Some(record) = record else {
            self.quarantine(source_id, &path);
            return StoreLookup::Miss(MissReason::Corrupt);
        };
        if record.hash != text_hash || content_hash(&record.tree.source_text) != record.hash {
            return StoreLookup::Miss(MissReason::Stale);
        }
        StoreLookup::Hit(Box::new(record))
    }

    fn quarantine(&self, source_id: &str, path: &Path) {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
        let dest = self.root.join("quarantine").join(format!("{stamp}-{name}"));
        tracing::warn!(%source_id, dest = %dest.display(), "corrupt store record quarantined");
        if let Err(e) = fs::rename(path, &dest) {
            tracing::warn!(error = %e, "could not quarantine record; removing it");
            let _ = fs::remove_file(path);
        }
        let mut index = self.index.lock().expect("index lock");
        if index.remove(source_id).is_some() {
            if let Ok(bytes) = serde_json::to_vec_pretty(&*index) {
                let _ = Self::write_atomic(&self.root.join("index.json"), &bytes);
            }
        }
    }

    pub fn quarantined(&self) -> usize {
        fs::read_dir(self.root.join("quarantine")).map(|d| d.count()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doctree::Block;

    fn tree(text: &str) -> DocTree {
        DocTree::from_text_blocks("doc-1", vec![Block::section("A", vec![text.to_string()])])
    }

    fn open(dir: &Path) -> CorpusStore {
        CorpusStore::open(dir, SkipPolicy::default()).unwrap()
    }

    #[test]
    fn put_then_get_returns_the_tree() {
        let dir = tempfile::tempdir().unwrap();
        let s = open(dir.path());
        let t = tree("hello world");
        s.put("doc-1", &t, StructMeta::now("stub", 0)).unwrap();
        match s.get("doc-1", &content_hash(&t.source_text)) {
            StoreLookup::Hit(r) => assert_eq!(r.tree, t),
            other => panic!("{other:?}"),
        }
        // survives reopening
        assert!(matches!(open(dir.path()).get("doc-1", &content_hash("hello world")), StoreLookup::Hit(_)));
        let p = s.record_path("doc-1");
        let h = content_hash("doc-1");
        assert!(p.ends_with(format!("records/{}/{}/{h}.json", &h[..2], &h[2..4])));
    }

    #[test]
    fn edited_source_is_stale() {
        let dir = tempfile::tempdir().unwrap();
        let s = open(dir.path());
        s.put("doc-1", &tree("hello world"), StructMeta::now("stub", 0)).unwrap();
        assert!(matches!(s.get("doc-1", &content_hash("hello world!")), StoreLookup::Miss(MissReason::Stale)));
        assert!(matches!(s.get("other", "x"), StoreLookup::Miss(MissReason::Absent)));
    }

    #[test]
    fn truncated_record_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let s = open(dir.path());
        s.put("doc-1", &tree("hello world"), StructMeta::now("stub", 0)).unwrap();
        let p = s.record_path("doc-1");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(s.get("doc-1", &content_hash("hello world")), StoreLookup::Miss(MissReason::Corrupt)));
        assert_eq!(s.quarantined(), 1);
        assert!(!p.exists());
        assert!(matches!(s.get("doc-1", &content_hash("hello world")), StoreLookup::Miss(MissReason::Absent)));
    }

    #[test]
    fn invalid_tree_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let s = open(dir.path());
        let mut t = tree("hello world");
        t.nodes[2].content = Some("something else".into());
        assert!(matches!(s.put("doc-1", &t, StructMeta::now("stub", 0)), Err(StoreError::InvalidTree { .. })));
    }
}
