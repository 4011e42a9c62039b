//! Prefix sharding: shard `i` of `2^d` holds the keys whose first `d` path
//! bits spell `i`. Each shard reports the digest of its depth-`d` sub-tree
//! and the top `d` levels are recomputed from those.

use thiserror::Error;

use crate::hash::{Digest, HashConfig};
use crate::tree::{SparseTree, TreeError};

pub const MAX_SHARD_BITS: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShardError {
    #[error("expected {expected} shard roots, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("shard bits {0} out of range")]
    BadDepth(usize),
}

/// First `d` bits of the key's path as an integer.
pub fn shard_index(cfg: &HashConfig, key: &[u8], d: usize) -> usize {
    let path = cfg.key_path(key);
    (0..d).fold(0, |acc, i| (acc << 1) | path.get(i) as usize)
}

fn prefix_bits(index: usize, d: usize) -> Vec<bool> {
    (0..d).rev().map(|i| index >> i & 1 == 1).collect()
}

/// Folds `2^d` sub-tree digests, ordered by prefix, up to the root.
pub fn combine_shard_roots(cfg: &HashConfig, roots: &[Digest], d: usize) -> Result<Digest, ShardError> {
    if d > MAX_SHARD_BITS || d > cfg.path_height() {
        return Err(ShardError::BadDepth(d));
    }
    if roots.len() != 1 << d {
        return Err(ShardError::WrongCount {
            expected: 1 << d,
            got: roots.len(),
        });
    }
    let mut level = roots.to_vec();
    while level.len() > 1 {
        level = level
            .chunks_exact(2)
            .map(|p| cfg.digest_pair(&p[0], &p[1]))
            .collect();
    }
    Ok(level[0])
}

/// `2^d` independent trees, one per prefix.
#[derive(Debug, Clone)]
pub struct ShardedTree {
    d: usize,
    shards: Vec<SparseTree>,
}

impl ShardedTree {
    pub fn new(cfg: HashConfig, d: usize) -> Result<Self, ShardError> {
        if d > MAX_SHARD_BITS || d > cfg.path_height() {
            return Err(ShardError::BadDepth(d));
        }
        Ok(ShardedTree {
            d,
            shards: (0..1 << d).map(|_| SparseTree::new(cfg)).collect(),
        })
    }

    pub fn cfg(&self) -> &HashConfig {
        self.shards[0].cfg()
    }

    pub fn shard_of(&self, key: &[u8]) -> usize {
        shard_index(self.cfg(), key, self.d)
    }

    pub fn insert(&mut self, key: &[u8], value: Digest) -> Result<bool, TreeError> {
        let i = self.shard_of(key);
        self.shards[i].insert(key, value)
    }

    pub fn delete(&mut self, key: &[u8]) -> Result<Digest, TreeError> {
        let i = self.shard_of(key);
        self.shards[i].delete(key)
    }

    pub fn shard(&self, i: usize) -> &SparseTree {
        &self.shards[i]
    }

    /// Digest of shard `i`'s depth-`d` sub-tree.
    pub fn shard_root(&self, i: usize) -> Digest {
        self.shards[i].subtree_root(&prefix_bits(i, self.d))
    }

    pub fn root(&self) -> Digest {
        let roots: Vec<Digest> = (0..self.shards.len()).map(|i| self.shard_root(i)).collect();
        combine_shard_roots(self.cfg(), &roots, self.d).expect("one root per shard")
    }
}
