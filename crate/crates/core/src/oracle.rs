//! Brute-force dense keyed hash tree.
//!
//! Materializes all `2^(H+1) - 1` nodes of the tree, heap-indexed (root at 0,
//! children of `i` at `2i+1` and `2i+2`). Only usable for small path heights.
//! It shares no traversal code with [`crate::tree`]; the two are checked
//! against each other.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hash::{Digest, HashConfig};
use crate::proof::{HashPair, PathProof};

/// Largest path height the oracle will materialize.
pub const MAX_ORACLE_HEIGHT: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("path height {0} exceeds the oracle limit of {MAX_ORACLE_HEIGHT}")]
    TooLarge(usize),
    #[error("two keys map to leaf {0}")]
    PathCollision(usize),
}

#[derive(Debug, Clone)]
pub struct DenseTree {
    cfg: HashConfig,
    nodes: Vec<Digest>,
}

fn leaf_index(cfg: &HashConfig, key: &[u8]) -> usize {
    let d = cfg.digest(key);
    let bytes = d.as_bytes();
    (0..cfg.path_height()).fold(0usize, |acc, i| {
        let bit = (bytes[i / 8] >> (7 - i % 8)) & 1;
        (acc << 1) | bit as usize
    })
}

impl DenseTree {
    /// Builds the full tree holding `entries` (key → leaf digest).
    pub fn build(cfg: &HashConfig, entries: &BTreeMap<Vec<u8>, Digest>) -> Result<Self, OracleError> {
        let h = cfg.path_height();
        if h > MAX_ORACLE_HEIGHT {
            return Err(OracleError::TooLarge(h));
        }
        let first_leaf = (1usize << h) - 1;
        let total = (1usize << (h + 1)) - 1;
        let empty = cfg.digest(b"");
        let mut nodes = vec![empty; total];
        let mut seen = vec![false; 1 << h];
        for (key, value) in entries {
            let idx = leaf_index(cfg, key);
            if std::mem::replace(&mut seen[idx], true) {
                return Err(OracleError::PathCollision(idx));
            }
            nodes[first_leaf + idx] = *value;
        }
        for i in (0..first_leaf).rev() {
            nodes[i] = cfg.digest_pair(&nodes[2 * i + 1], &nodes[2 * i + 2]);
        }
        Ok(DenseTree { cfg: *cfg, nodes })
    }

    pub fn root(&self) -> Digest {
        self.nodes[0]
    }

    pub fn node_total(&self) -> usize {
        self.nodes.len()
    }

    /// Sibling pairs along `key`'s path, root level first.
    pub fn proof(&self, key: &[u8]) -> PathProof {
        let h = self.cfg.path_height();
        let leaf = leaf_index(&self.cfg, key);
        let mut pairs = Vec::with_capacity(h);
        let mut node = 0usize;
        for depth in 0..h {
            pairs.push(HashPair::new(
                self.nodes[2 * node + 1],
                self.nodes[2 * node + 2],
            ));
            let bit = (leaf >> (h - 1 - depth)) & 1;
            node = 2 * node + 1 + bit;
        }
        PathProof::new(pairs)
    }
}

pub fn dense_root(
    cfg: &HashConfig,
    entries: &BTreeMap<Vec<u8>, Digest>,
) -> Result<Digest, OracleError> {
    DenseTree::build(cfg, entries).map(|t| t.root())
}

pub fn dense_proof(
    cfg: &HashConfig,
    entries: &BTreeMap<Vec<u8>, Digest>,
    key: &[u8],
) -> Result<PathProof, OracleError> {
    DenseTree::build(cfg, entries).map(|t| t.proof(key))
}
