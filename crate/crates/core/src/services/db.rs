//! The database: a key-value table and its sparse tree, kept in lockstep and
//! persisted through a replay log.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;
use std::sync::{Mutex, RwLock};

use thiserror::Error;

use crate::credentials::SignedEntryValue;
use crate::hash::{Digest, HashConfig};
use crate::proof::{PathProof, Reply};
use crate::services::wal::{LogStore, MemoryLog, Replay, Wal, WalOp, WalRecord};
use crate::services::wire::{MAX_KEY_LEN, MAX_VALUE_LEN};
use crate::tree::SparseTree;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("no such key")]
    NotFound,
    #[error("the key's leaf is held by another key")]
    PathCollision,
    #[error("value is not a signed entry: {0}")]
    Malformed(String),
    #[error("key or value exceeds its size limit")]
    Oversize,
    #[error("storage: {0}")]
    Io(#[from] io::Error),
}

/// Table plus tree. Invariant: the tree has a leaf at `key_path(k)` holding
/// `h(encode(sev))` exactly when the table maps `k` to `sev`.
#[derive(Debug, Clone)]
pub struct DbState {
    cfg: HashConfig,
    table: BTreeMap<Vec<u8>, SignedEntryValue>,
    tree: SparseTree,
}

/// A validated mutation, ready to log and apply.
enum Prepared {
    Put {
        key: Vec<u8>,
        sev: SignedEntryValue,
        leaf: Digest,
    },
    Delete {
        key: Vec<u8>,
    },
}

impl DbState {
    pub fn new(cfg: HashConfig) -> Self {
        DbState {
            cfg,
            table: BTreeMap::new(),
            tree: SparseTree::new(cfg),
        }
    }

    pub fn cfg(&self) -> &HashConfig {
        &self.cfg
    }

    pub fn tree(&self) -> &SparseTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn root(&self) -> Digest {
        self.tree.root_digest()
    }

    pub fn entry(&self, key: &[u8]) -> Option<&SignedEntryValue> {
        self.table.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.table.keys()
    }

    pub fn get(&self, key: &[u8]) -> (Reply, PathProof) {
        let reply = match self.table.get(key) {
            Some(sev) => Reply::Present(sev.encode()),
            None => Reply::Absent,
        };
        (reply, self.tree.rootpath(key))
    }

    pub fn rootpath(&self, key: &[u8]) -> PathProof {
        self.tree.rootpath(key)
    }

    fn prepare_put(&self, key: &[u8], value: &[u8]) -> Result<Prepared, DbError> {
        if key.len() > MAX_KEY_LEN || value.len() > MAX_VALUE_LEN {
            return Err(DbError::Oversize);
        }
        let sev = SignedEntryValue::decode(value).map_err(|e| DbError::Malformed(e.to_string()))?;
        if !self.table.contains_key(key) && self.tree.lookup_digest(key).is_some() {
            return Err(DbError::PathCollision);
        }
        let leaf = self.cfg.digest(value);
        if leaf == self.tree.empties().get(0) {
            return Err(DbError::Malformed("value digests to the empty leaf".into()));
        }
        Ok(Prepared::Put {
            key: key.to_vec(),
            sev,
            leaf,
        })
    }

    fn prepare_delete(&self, key: &[u8]) -> Result<Prepared, DbError> {
        if !self.table.contains_key(key) {
            return Err(DbError::NotFound);
        }
        Ok(Prepared::Delete { key: key.to_vec() })
    }

    fn apply(&mut self, p: Prepared) -> Digest {
        match p {
            Prepared::Put { key, sev, leaf } => {
                self.tree.insert(&key, leaf).expect("checked in prepare");
                self.table.insert(key, sev);
            }
            Prepared::Delete { key } => {
                self.tree.delete(&key).expect("checked in prepare");
                self.table.remove(&key);
            }
        }
        self.root()
    }

    /// In-memory put without logging.
    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<Digest, DbError> {
        let p = self.prepare_put(key, value)?;
        Ok(self.apply(p))
    }

    pub fn delete(&mut self, key: &[u8]) -> Result<Digest, DbError> {
        let p = self.prepare_delete(key)?;
        Ok(self.apply(p))
    }

    pub fn replay(&mut self, rec: &WalRecord) -> Result<Digest, DbError> {
        match &rec.op {
            WalOp::Put { key, value } => self.put(key, value),
            WalOp::Delete { key } => self.delete(key),
        }
    }

    /// Full coherence check between table and tree.
    pub fn audit(&self) -> Result<(), String> {
        self.tree.audit()?;
        if self.tree.len() != self.table.len() {
            return Err(format!(
                "tree has {} leaves, table {} keys",
                self.tree.len(),
                self.table.len()
            ));
        }
        for (k, sev) in &self.table {
            if self.tree.lookup_digest(k) != Some(self.cfg.digest(&sev.encode())) {
                return Err(format!("leaf of key {} disagrees with the table", hex::encode(k)));
            }
        }
        Ok(())
    }
}

/// Shared, logged database. Mutations are serialized and logged before they
/// become visible; reads run concurrently between mutations.
pub struct Database {
    state: RwLock<DbState>,
    log: Mutex<Box<dyn LogStore>>,
    seq: Mutex<u64>,
}

impl std::fmt::Debug for Database {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Database").finish_non_exhaustive()
    }
}

impl Database {
    pub fn in_memory(cfg: HashConfig) -> Self {
        Self::with_log(DbState::new(cfg), Box::new(MemoryLog::default()), 0)
    }

    pub fn with_log(state: DbState, log: Box<dyn LogStore>, seq: u64) -> Self {
        Database {
            state: RwLock::new(state),
            log: Mutex::new(log),
            seq: Mutex::new(seq),
        }
    }

    /// Opens `dir/wal.log`, replaying it into a fresh state.
    pub fn open(cfg: HashConfig, dir: &Path) -> Result<(Self, Replay), DbError> {
        std::fs::create_dir_all(dir)?;
        let (wal, replay) = Wal::open(&dir.join("wal.log"))?;
        let mut state = DbState::new(cfg);
        let mut seq = 0;
        for rec in &replay.records {
            state.replay(rec)?;
            seq = rec.seq;
        }
        Ok((Self::with_log(state, Box::new(wal), seq), replay))
    }

    pub fn cfg(&self) -> HashConfig {
        *self.read().cfg()
    }

    pub fn read(&self) -> std::sync::RwLockReadGuard<'_, DbState> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn root(&self) -> Digest {
        self.read().root()
    }

    pub fn get(&self, key: &[u8]) -> (Reply, PathProof) {
        self.read().get(key)
    }

    pub fn rootpath(&self, key: &[u8]) -> PathProof {
        self.read().rootpath(key)
    }

    pub fn put(&self, key: &[u8], value: &[u8]) -> Result<Digest, DbError> {
        self.mutate(
            |s| s.prepare_put(key, value),
            |seq| WalRecord {
                seq,
                op: WalOp::Put {
                    key: key.to_vec(),
                    value: value.to_vec(),
                },
            },
        )
    }

    pub fn delete(&self, key: &[u8]) -> Result<Digest, DbError> {
        self.mutate(
            |s| s.prepare_delete(key),
            |seq| WalRecord {
                seq,
                op: WalOp::Delete { key: key.to_vec() },
            },
        )
    }

    fn mutate(
        &self,
        prepare: impl FnOnce(&DbState) -> Result<Prepared, DbError>,
        record: impl FnOnce(u64) -> WalRecord,
    ) -> Result<Digest, DbError> {
        let mut seq = self.seq.lock().unwrap_or_else(|e| e.into_inner());
        let prepared = prepare(&self.read())?;
        let rec = record(*seq + 1);
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .append(&rec.encode())?;
        *seq += 1;
        let mut state = self.state.write().unwrap_or_else(|e| e.into_inner());
        Ok(state.apply(prepared))
    }

    /// Number of logged mutations.
    pub fn seq(&self) -> u64 {
        *self.seq.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn audit(&self) -> Result<(), String> {
        self.read().audit()
    }

    /// Copy of the current state.
    pub fn snapshot(&self) -> DbState {
        self.read().clone()
    }
}
