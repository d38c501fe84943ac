//! Document persistence behind a small compare-and-set interface.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredDocument {
    pub collection: String,
    pub id: String,
    pub revision: u64,
    /// Canonical document text, kept verbatim.
    pub body: String,
    pub updated_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    /// Stored revision differs from the expected one; `None` means absent.
    #[error("revision conflict: stored revision is {current:?}")]
    Conflict { current: Option<u64> },
    #[error("invalid document id `{0}`")]
    InvalidId(String),
    #[error("corrupt document {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub trait DocumentStore: Send + Sync {
    fn get(&self, collection: &str, id: &str) -> Result<Option<StoredDocument>, StoreError>;

    /// Writes `doc` if the stored revision equals `expected` (`None`: the
    /// document must not exist yet).
    fn put_if_revision(
        &self,
        doc: &StoredDocument,
        expected: Option<u64>,
    ) -> Result<(), StoreError>;

    /// Returns whether a document was removed.
    fn delete(&self, collection: &str, id: &str) -> Result<bool, StoreError>;

    /// All documents of a collection, ordered by id.
    fn scan(&self, collection: &str) -> Result<Vec<StoredDocument>, StoreError>;
}

fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_string()))
    }
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    docs: Mutex<BTreeMap<(String, String), StoredDocument>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DocumentStore for MemoryStore {
    fn get(&self, collection: &str, id: &str) -> Result<Option<StoredDocument>, StoreError> {
        Ok(self
            .docs
            .lock()
            .unwrap()
            .get(&(collection.to_string(), id.to_string()))
            .cloned())
    }

    fn put_if_revision(
        &self,
        doc: &StoredDocument,
        expected: Option<u64>,
    ) -> Result<(), StoreError> {
        check_id(&doc.collection)?;
        check_id(&doc.id)?;
        let mut docs = self.docs.lock().unwrap();
        let key = (doc.collection.clone(), doc.id.clone());
        let current = docs.get(&key).map(|d| d.revision);
        if current != expected {
            return Err(StoreError::Conflict { current });
        }
        docs.insert(key, doc.clone());
        Ok(())
    }

    fn delete(&self, collection: &str, id: &str) -> Result<bool, StoreError> {
        Ok(self
            .docs
            .lock()
            .unwrap()
            .remove(&(collection.to_string(), id.to_string()))
            .is_some())
    }

    fn scan(&self, collection: &str) -> Result<Vec<StoredDocument>, StoreError> {
        let docs = self.docs.lock().unwrap();
        Ok(docs
            .values()
            .filter(|d| d.collection == collection)
            .cloned()
            .collect())
    }
}

/// One JSON file per document at `root/<collection>/<id>.json`, replaced
/// atomically through a temporary file and rename.
#[derive(Debug)]
pub struct FileStore {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, collection: &str, id: &str) -> PathBuf {
        self.root.join(collection).join(format!("{id}.json"))
    }

    fn read(path: &Path) -> Result<Option<StoredDocument>, StoreError> {
        match fs::read(path) {
            Ok(bytes) => {
                serde_json::from_slice(&bytes)
                    .map(Some)
                    .map_err(|e| StoreError::Corrupt {
                        path: path.to_path_buf(),
                        message: e.to_string(),
                    })
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

impl DocumentStore for FileStore {
    fn get(&self, collection: &str, id: &str) -> Result<Option<StoredDocument>, StoreError> {
        check_id(collection)?;
        check_id(id)?;
        Self::read(&self.path_of(collection, id))
    }

    fn put_if_revision(
        &self,
        doc: &StoredDocument,
        expected: Option<u64>,
    ) -> Result<(), StoreError> {
        check_id(&doc.collection)?;
        check_id(&doc.id)?;
        let path = self.path_of(&doc.collection, &doc.id);
        let _guard = self.write_lock.lock().unwrap();
        let current = Self::read(&path)?.map(|d| d.revision);
        if current != expected {
            return Err(StoreError::Conflict { current });
        }
        let dir = path.parent().expect("document path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.tmp", doc.id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec_pretty(doc).expect("document serializes"))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn delete(&self, collection: &str, id: &str) -> Result<bool, StoreError> {
        check_id(collection)?;
        check_id(id)?;
        let _guard = self.write_lock.lock().unwrap();
        match fs::remove_file(self.path_of(collection, id)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    fn scan(&self, collection: &str) -> Result<Vec<StoredDocument>, StoreError> {
        check_id(collection)?;
        let dir = self.root.join(collection);
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut docs = Vec::new();
        for p in paths {
            docs.extend(Self::read(&p)?);
        }
        Ok(docs)
    }
}
