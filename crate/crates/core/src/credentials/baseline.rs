//! Baseline credential schemes that the keyed hash tree replaces: a single
//! hash over all keys, a hash chain, and a forest of perfect hash trees.
//!
//! Keys are framed with an 8-byte big-endian length prefix instead of an
//! end-of-key marker so that binary keys cannot run into each other.

use crate::hash::{Digest, HashConfig};

fn length_prefixed(key: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + key.len());
    out.extend_from_slice(&(key.len() as u64).to_be_bytes());
    out.extend_from_slice(key);
    out
}

/// `h(lp(k_1) ‖ … ‖ lp(k_n))` over the keys sorted bytewise.
pub fn simple_hash_credential<K: AsRef<[u8]>>(keys: &[K], cfg: &HashConfig) -> Digest {
    let mut sorted: Vec<&[u8]> = keys.iter().map(|k| k.as_ref()).collect();
    sorted.sort_unstable();
    let mut buf = Vec::new();
    for k in sorted {
        buf.extend_from_slice(&(k.len() as u64).to_be_bytes());
        buf.extend_from_slice(k);
    }
    cfg.digest(&buf)
}

/// `c_0 = h("")`.
pub fn chain_genesis(cfg: &HashConfig) -> Digest {
    cfg.digest(b"")
}

/// `c_i = h(c_{i-1} ‖ lp(k_i))`.
pub fn chain_credential_extend(prev: &Digest, key: &[u8], cfg: &HashConfig) -> Digest {
    cfg.digest_parts(&[prev.as_bytes(), &length_prefixed(key)])
}

/// Roots of perfect hash trees, oldest (tallest) first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForestCredential {
    pub trees: Vec<(u32, Digest)>,
}

impl ForestCredential {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a leaf and merges equal-height trees from the back.
    pub fn append(&mut self, key: &[u8], cfg: &HashConfig) {
        self.trees.push((0, cfg.digest(&length_prefixed(key))));
        while let [.., (h_old, r_old), (h_new, r_new)] = self.trees[..] {
            if h_old != h_new {
                break;
            }
            self.trees.truncate(self.trees.len() - 2);
            self.trees.push((h_old + 1, cfg.digest_pair(&r_old, &r_new)));
        }
    }

    pub fn heights(&self) -> Vec<u32> {
        self.trees.iter().map(|(h, _)| *h).collect()
    }

    /// Number of appended leaves.
    pub fn leaf_count(&self) -> u64 {
        self.trees.iter().map(|(h, _)| 1u64 << h).sum()
    }
}

pub fn forest_append(mut f: ForestCredential, key: &[u8], cfg: &HashConfig) -> ForestCredential {
    f.append(key, cfg);
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merkle(cfg: &HashConfig, leaves: &[Digest]) -> Digest {
        if leaves.len() == 1 {
            return leaves[0];
        }
        let (l, r) = leaves.split_at(leaves.len() / 2);
        cfg.digest_pair(&merkle(cfg, l), &merkle(cfg, r))
    }

    #[test]
    fn simple_hash_framing() {
        let cfg = HashConfig::default_profile();
        let none: [&[u8]; 0] = [];
        assert_eq!(simple_hash_credential(&none, &cfg), cfg.digest(b""));
        let ab = simple_hash_credential(&[b"a".as_ref(), b"b"], &cfg);
        let joined = simple_hash_credential(&[b"ab".as_ref()], &cfg);
        assert_ne!(ab, joined);
        let mut expect = Vec::new();
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 1, b'a']);
        expect.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 1, b'b']);
        assert_eq!(ab, cfg.digest(&expect));
        assert_eq!(simple_hash_credential(&[b"b".as_ref(), b"a"], &cfg), ab);
    }

    #[test]
    fn chain_unfolds_and_is_order_sensitive() {
        let cfg = HashConfig::default_profile();
        let c0 = chain_genesis(&cfg);
        assert_eq!(c0, cfg.digest(b""));
        let mut buf = c0.as_bytes().to_vec();
        buf.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0, 1, b'k']);
        assert_eq!(chain_credential_extend(&c0, b"k", &cfg), cfg.digest(&buf));
        let ab = chain_credential_extend(&chain_credential_extend(&c0, b"a", &cfg), b"b", &cfg);
        let ba = chain_credential_extend(&chain_credential_extend(&c0, b"b", &cfg), b"a", &cfg);
        assert_ne!(ab, ba);
    }

    #[test]
    fn forest_matches_merkle_recursion() {
        let cfg = HashConfig::default_profile();
        for n in [1usize, 2, 4, 8, 16, 32] {
            let keys: Vec<Vec<u8>> = (0..n).map(|i| format!("key{i}").into_bytes()).collect();
            let mut f = ForestCredential::new();
            for k in &keys {
                f.append(k, &cfg);
            }
            let leaves: Vec<Digest> = keys.iter().map(|k| cfg.digest(&length_prefixed(k))).collect();
            assert_eq!(f.trees.len(), 1);
            assert_eq!(f.trees[0].1, merkle(&cfg, &leaves));
        }
    }

    #[test]
    fn forest_heights_follow_binary_count() {
        let cfg = HashConfig::toy();
        let mut f = ForestCredential::new();
        for n in 1u64..=300 {
            f.append(&n.to_be_bytes(), &cfg);
            let expect: Vec<u32> = (0..64).rev().filter(|b| n >> b & 1 == 1).collect();
            assert_eq!(f.heights(), expect, "n = {n}");
            assert_eq!(f.leaf_count(), n);
        }
        let mut five = ForestCredential::new();
        for i in 0u8..5 {
            five = forest_append(five, &[i], &cfg);
        }
        assert_eq!(five.heights(), vec![2, 0]);
    }

    #[test]
    fn forest_is_order_sensitive() {
        let cfg = HashConfig::toy();
        let mut a = ForestCredential::new();
        let mut b = ForestCredential::new();
        a.append(b"x", &cfg);
        a.append(b"y", &cfg);
        b.append(b"y", &cfg);
        b.append(b"x", &cfg);
        assert_ne!(a, b);
    }
}
