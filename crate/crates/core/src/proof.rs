//! Path proofs: verification of database replies against a committed root,
//! writer-side root recomputation, and the fixed-size wire encoding.
//!
//! A proof lists the `H` sibling pairs along a key's path, root level first.
//! Proofs are never compressed: an encoded proof is always `2·H·L` bytes.

use thiserror::Error;

use crate::hash::{hash_ordered, Digest, EmptyTable, HashConfig, PathBits};

/// The two children of one node on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashPair {
    pub left: Digest,
    pub right: Digest,
}

impl HashPair {
    pub fn new(left: Digest, right: Digest) -> Self {
        HashPair { left, right }
    }

    /// Pair with `on_path` on the side selected by `bit`.
    pub fn ordered(bit: bool, on_path: Digest, sibling: Digest) -> Self {
        if bit {
            HashPair::new(sibling, on_path)
        } else {
            HashPair::new(on_path, sibling)
        }
    }

    /// Left for `false`, right for `true`.
    pub fn get(&self, bit: bool) -> Digest {
        if bit {
            self.right
        } else {
            self.left
        }
    }

    /// Digest of `left ‖ right`: the parent node.
    pub fn parent(&self, cfg: &HashConfig) -> Digest {
        cfg.digest_pair(&self.left, &self.right)
    }
}

/// Sibling pairs along one key path. Index 0 holds the children of the root,
/// index `H-1` the leaf layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathProof {
    pub pairs: Vec<HashPair>,
}

impl PathProof {
    pub fn new(pairs: Vec<HashPair>) -> Self {
        PathProof { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Root the proof resolves to.
    pub fn root(&self, cfg: &HashConfig) -> Option<Digest> {
        self.pairs.first().map(|p| p.parent(cfg))
    }

    /// The on-path leaf element for `path`.
    pub fn leaf(&self, path: &PathBits) -> Option<Digest> {
        let last = self.pairs.last()?;
        Some(last.get(path.get(path.len() - 1)))
    }

    /// Checks `pairs[i][b_i] == h(pairs[i+1])` at every level; returns the
    /// first level where it breaks.
    pub fn first_chain_break(&self, cfg: &HashConfig, path: &PathBits) -> Option<usize> {
        self.pairs
            .windows(2)
            .enumerate()
            .find(|(i, w)| w[0].get(path.get(*i)) != w[1].parent(cfg))
            .map(|(i, _)| i)
    }

    /// Bytes of the proof: pairs root level first, left before right.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        for p in &self.pairs {
            out.extend_from_slice(p.left.as_bytes());
            out.extend_from_slice(p.right.as_bytes());
        }
        out
    }

    pub fn encoded_len(&self) -> usize {
        self.pairs
            .iter()
            .map(|p| p.left.len() + p.right.len())
            .sum()
    }

    /// Parses exactly `2·H·L` bytes.
    pub fn decode(cfg: &HashConfig, bytes: &[u8]) -> Result<PathProof, ProofError> {
        let l = cfg.digest_len();
        let expected = encoded_proof_len(cfg);
        if bytes.len() != expected {
            return Err(ProofError::BadLength {
                expected,
                got: bytes.len(),
            });
        }
        let pairs = bytes
            .chunks_exact(2 * l)
            .map(|c| {
                HashPair::new(
                    Digest::from_slice(&c[..l]).expect("digest length"),
                    Digest::from_slice(&c[l..]).expect("digest length"),
                )
            })
            .collect();
        Ok(PathProof { pairs })
    }
}

/// Size in bytes of every encoded proof under `cfg`.
pub fn encoded_proof_len(cfg: &HashConfig) -> usize {
    2 * cfg.path_height() * cfg.digest_len()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProofError {
    #[error("proof has {got} bytes, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("proof does not have the shape of this profile")]
    BadShape,
    #[error("proof chain breaks at level {0}")]
    ChainBreak(usize),
}

/// What the database answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    /// The full stored value (not its digest).
    Present(Vec<u8>),
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    LeafMismatch,
    ChainBreak(usize),
    RootMismatch,
    BadLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyOutcome {
    Valid,
    Invalid(InvalidReason),
}

impl VerifyOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, VerifyOutcome::Valid)
    }
}

/// True if the proof has `H` pairs of `L`-byte digests.
fn well_formed(cfg: &HashConfig, proof: &PathProof) -> bool {
    let l = cfg.digest_len();
    proof.len() == cfg.path_height()
        && proof
            .pairs
            .iter()
            .all(|p| p.left.len() == l && p.right.len() == l)
}

/// Checks a reply for `key` against `expected_root`.
///
/// Checks run in this order and the first failure is reported: proof shape,
/// leaf element against the reply, chaining, root.
pub fn verify_reply(
    cfg: &HashConfig,
    empties: &EmptyTable,
    expected_root: &Digest,
    key: &[u8],
    reply: &Reply,
    proof: &PathProof,
) -> VerifyOutcome {
    if !well_formed(cfg, proof) {
        return VerifyOutcome::Invalid(InvalidReason::BadLength);
    }
    let path = cfg.key_path(key);
    let expected_leaf = match reply {
        Reply::Present(value) => cfg.digest(value),
        Reply::Absent => empties.get(0),
    };
    if proof.leaf(&path) != Some(expected_leaf) {
        return VerifyOutcome::Invalid(InvalidReason::LeafMismatch);
    }
    verify_path(cfg, expected_root, &path, proof)
}

/// Shape, chaining and root checks without looking at the leaf.
pub fn verify_path(
    cfg: &HashConfig,
    expected_root: &Digest,
    path: &PathBits,
    proof: &PathProof,
) -> VerifyOutcome {
    if !well_formed(cfg, proof) {
        return VerifyOutcome::Invalid(InvalidReason::BadLength);
    }
    if let Some(level) = proof.first_chain_break(cfg, path) {
        return VerifyOutcome::Invalid(InvalidReason::ChainBreak(level));
    }
    if proof.root(cfg).as_ref() != Some(expected_root) {
        return VerifyOutcome::Invalid(InvalidReason::RootMismatch);
    }
    VerifyOutcome::Valid
}

/// Root after replacing the leaf on `key`'s path with `new_leaf`.
///
/// Pass `E[0]` as `new_leaf` to compute the root after a deletion. The
/// off-path siblings are reused, so the result equals the root of the tree
/// after the same mutation, whatever the stored shape looks like.
pub fn updated_root(
    cfg: &HashConfig,
    key: &[u8],
    proof: &PathProof,
    new_leaf: Digest,
) -> Result<Digest, ProofError> {
    if !well_formed(cfg, proof) {
        return Err(ProofError::BadShape);
    }
    let path = cfg.key_path(key);
    if let Some(level) = proof.first_chain_break(cfg, &path) {
        return Err(ProofError::ChainBreak(level));
    }
    Ok(fold_to_root(cfg, &path, proof, new_leaf))
}

/// Folds `leaf` upward using the off-path siblings of `proof`.
pub(crate) fn fold_to_root(
    cfg: &HashConfig,
    path: &PathBits,
    proof: &PathProof,
    leaf: Digest,
) -> Digest {
    proof
        .pairs
        .iter()
        .enumerate()
        .rev()
        .fold(leaf, |cur, (i, pair)| {
            let bit = path.get(i);
            hash_ordered(cfg, bit, &cur, &pair.get(!bit))
        })
}
