//! Undeniable attester on top of the keyed hash tree.
//!
//! `D(S)` commits to a key set, `P(S, x)` proves membership or
//! non-membership of `x`, and `V(x, d, p)` checks such a proof. Producing an
//! accepting and a rejecting proof for the same `(x, d)` requires a hash
//! collision; [`extract_collision`] recovers it.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::hash::{Digest, EmptyTable, HashConfig};
use crate::proof::{verify_path, PathProof};
use crate::tree::SparseTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttesterVerdict {
    Accept,
    Reject,
    Error,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("key collides with the reserved empty-key marker")]
pub struct ReservedKey;

/// Reserved stand-in for the empty key: `0xFF` repeated `L + 1` times.
pub fn tau(cfg: &HashConfig) -> Vec<u8> {
    vec![0xFF; cfg.digest_len() + 1]
}

fn substitute(cfg: &HashConfig, key: &[u8]) -> Vec<u8> {
    if key.is_empty() {
        tau(cfg)
    } else {
        key.to_vec()
    }
}

/// A finite key set; the empty key is stored as `τ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySet {
    cfg: HashConfig,
    keys: BTreeSet<Vec<u8>>,
}

impl KeySet {
    pub fn new(cfg: HashConfig) -> Self {
        KeySet {
            cfg,
            keys: BTreeSet::new(),
        }
    }

    pub fn from_keys<I, K>(cfg: HashConfig, keys: I) -> Result<Self, ReservedKey>
    where
        I: IntoIterator<Item = K>,
        K: AsRef<[u8]>,
    {
        let mut set = KeySet::new(cfg);
        for k in keys {
            set.insert(k.as_ref())?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, key: &[u8]) -> Result<bool, ReservedKey> {
        if key == tau(&self.cfg).as_slice() {
            return Err(ReservedKey);
        }
        Ok(self.keys.insert(substitute(&self.cfg, key)))
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.keys.contains(&substitute(&self.cfg, key))
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn cfg(&self) -> &HashConfig {
        &self.cfg
    }

    /// Tree holding `k → h(k)` for every member.
    pub fn tree(&self) -> SparseTree {
        let mut t = SparseTree::new(self.cfg);
        for k in &self.keys {
            t.insert(k, self.cfg.digest(k))
                .expect("h(k) differs from E[0] for every stored key");
        }
        t
    }
}

/// `D(S)`: root of the key tree.
pub fn attester_d(set: &KeySet) -> Digest {
    set.tree().root_digest()
}

/// `P(S, x)`: the path of `x` in the key tree.
pub fn attester_p(set: &KeySet, x: &[u8]) -> PathProof {
    set.tree().rootpath(&substitute(&set.cfg, x))
}

/// `V(x, d, p)`.
pub fn attester_v(x: &[u8], d: &Digest, p: &PathProof, cfg: &HashConfig) -> AttesterVerdict {
    let x = substitute(cfg, x);
    let path = cfg.key_path(&x);
    if !verify_path(cfg, d, &path, p).is_valid() {
        return AttesterVerdict::Error;
    }
    let leaf = p.leaf(&path).expect("proof has H pairs");
    let member = cfg.digest(&x);
    let empty = EmptyTable::build(cfg).get(0);
    if leaf == member {
        AttesterVerdict::Accept
    } else if leaf == empty {
        AttesterVerdict::Reject
    } else {
        AttesterVerdict::Error
    }
}

/// Given an accepting `p` and a rejecting `p_bar` for the same `(x, d)`,
/// returns two distinct inputs with the same digest.
///
/// Both proofs start from the same root and end in different leaves, so
/// walking down there is a first level where the pairs differ yet their
/// parent values agree.
pub fn extract_collision(
    x: &[u8],
    d: &Digest,
    p: &PathProof,
    p_bar: &PathProof,
    cfg: &HashConfig,
) -> Option<(Vec<u8>, Vec<u8>)> {
    if attester_v(x, d, p, cfg) != AttesterVerdict::Accept
        || attester_v(x, d, p_bar, cfg) != AttesterVerdict::Reject
    {
        return None;
    }
    let path = cfg.key_path(&substitute(cfg, x));
    let mut above = *d;
    for (i, (a, b)) in p.pairs.iter().zip(&p_bar.pairs).enumerate() {
        if a != b {
            // both pairs hash to `above`: they chain from the same value
            let enc = |pair: &crate::proof::HashPair| {
                [pair.left.as_bytes(), pair.right.as_bytes()].concat()
            };
            debug_assert_eq!(a.parent(cfg), above);
            debug_assert_eq!(b.parent(cfg), above);
            return Some((enc(a), enc(b)));
        }
        above = a.get(path.get(i));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dense_root;
    use crate::proof::HashPair;
    use std::collections::BTreeMap;

    #[test]
    fn empty_set_commits_to_empty_root() {
        let cfg = HashConfig::toy();
        let s = KeySet::new(cfg);
        let e = EmptyTable::build(&cfg);
        assert_eq!(attester_d(&s), e.root());
        let p = attester_p(&s, b"x");
        for (i, pair) in p.pairs.iter().enumerate() {
            assert_eq!(*pair, HashPair::new(e.get(7 - i), e.get(7 - i)));
        }
        assert_eq!(attester_v(b"x", &e.root(), &p, &cfg), AttesterVerdict::Reject);
    }

    #[test]
    fn singleton_matches_dense_oracle() {
        let cfg = HashConfig::toy();
        let s = KeySet::from_keys(cfg, [b"k".as_ref()]).unwrap();
        let entries = BTreeMap::from([(b"k".to_vec(), cfg.digest(b"k"))]);
        assert_eq!(attester_d(&s), dense_root(&cfg, &entries).unwrap());
    }

    #[test]
    fn empty_key_uses_tau() {
        let cfg = HashConfig::toy();
        let s = KeySet::from_keys(cfg, [b"".as_ref()]).unwrap();
        assert!(s.contains(b""));
        let d = attester_d(&s);
        assert_eq!(attester_v(b"", &d, &attester_p(&s, b""), &cfg), AttesterVerdict::Accept);
        let entries = BTreeMap::from([(tau(&cfg), cfg.digest(&tau(&cfg)))]);
        assert_eq!(d, dense_root(&cfg, &entries).unwrap());
        assert_eq!(KeySet::from_keys(cfg, [tau(&cfg)]), Err(ReservedKey));
    }

    #[test]
    fn verdicts_on_honest_and_broken_proofs() {
        let cfg = HashConfig::toy();
        let s = KeySet::from_keys(cfg, [b"a".as_ref(), b"b", b"c"]).unwrap();
        let d = attester_d(&s);
        assert_eq!(attester_v(b"a", &d, &attester_p(&s, b"a"), &cfg), AttesterVerdict::Accept);
        let absent = (0u32..)
            .map(|i| i.to_be_bytes().to_vec())
            .find(|k| {
                let path = cfg.key_path(k);
                [b"a".as_ref(), b"b", b"c"].iter().all(|m| !cfg.key_path(m).same_leaf(&path))
            })
            .unwrap();
        let p = attester_p(&s, &absent);
        assert_eq!(attester_v(&absent, &d, &p, &cfg), AttesterVerdict::Reject);
        let mut short = p.clone();
        short.pairs.pop();
        assert_eq!(attester_v(&absent, &d, &short, &cfg), AttesterVerdict::Error);
        let wrong_root = cfg.digest(b"other");
        assert_eq!(attester_v(&absent, &wrong_root, &p, &cfg), AttesterVerdict::Error);
        assert_eq!(extract_collision(&absent, &wrong_root, &p, &p, &cfg), None);
    }

    #[test]
    fn identical_proofs_yield_no_collision() {
        let cfg = HashConfig::toy();
        let s = KeySet::from_keys(cfg, [b"a".as_ref()]).unwrap();
        let p = attester_p(&s, b"a");
        assert_eq!(extract_collision(b"a", &attester_d(&s), &p, &p, &cfg), None);
    }
}
