//! Hash abstraction, key paths and the table of empty sub-tree roots.
//!
//! Every digest in the system is produced through a [`HashConfig`]. The
//! config fixes the hash algorithm, the digest length `L` in bytes and the
//! path height `H` in bits: a key's leaf position is the first `H` bits of
//! the key's digest, most significant bit of byte 0 first.

use std::cell::Cell;
use std::fmt;

use sha1::Sha1;
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Largest digest length supported by any profile.
pub const MAX_DIGEST_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HashError {
    #[error("path height {height} outside 1..={max} for a {len}-byte digest")]
    BadPathHeight { height: usize, max: usize, len: usize },
    #[error("unknown algorithm id {0:#04x}")]
    UnknownAlgId(u8),
}

/// The hash functions a profile can be backed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HashAlg {
    Sha256,
    Sha1,
    /// SHA-256 truncated to its first two bytes. Collisions are cheap to find,
    /// which is exactly what the attester collision-extraction tests need.
    Sha256Trunc16,
}

impl HashAlg {
    pub fn output_len(self) -> usize {
        match self {
            HashAlg::Sha256 => 32,
            HashAlg::Sha1 => 20,
            HashAlg::Sha256Trunc16 => 2,
        }
    }
}

thread_local! {
    static HASH_CALLS: Cell<u64> = const { Cell::new(0) };
    static HASH_BLOCKS: Cell<u64> = const { Cell::new(0) };
}

/// Number of hash invocations made on the current thread so far.
///
/// Used by the benchmark harness to report machine-independent costs.
pub fn hash_invocations() -> u64 {
    HASH_CALLS.with(|c| c.get())
}

/// Number of 64-byte compression-function blocks processed on the current
/// thread so far. Unlike [`hash_invocations`] this grows with input length.
pub fn hash_blocks() -> u64 {
    HASH_BLOCKS.with(|c| c.get())
}

fn count_call(input_len: usize) {
    HASH_CALLS.with(|c| c.set(c.get() + 1));
    // both algorithms pad with one 0x80 byte and an 8-byte length
    let blocks = (input_len as u64 + 9).div_ceil(64);
    HASH_BLOCKS.with(|c| c.set(c.get() + blocks));
}

/// Algorithm, digest length and path height of a keyed hash tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HashConfig {
    alg_id: u8,
    alg: HashAlg,
    path_height: usize,
}

impl HashConfig {
    pub const DEFAULT_ALG_ID: u8 = 0x01;
    pub const SHA1_COMPAT_ALG_ID: u8 = 0x02;
    pub const WEAK16_ALG_ID: u8 = 0x7E;
    pub const TOY_ALG_ID: u8 = 0x7F;

    pub fn new(alg_id: u8, alg: HashAlg, path_height: usize) -> Result<Self, HashError> {
        let len = alg.output_len();
        if path_height == 0 || path_height > 8 * len {
            return Err(HashError::BadPathHeight {
                height: path_height,
                max: 8 * len,
                len,
            });
        }
        Ok(HashConfig {
            alg_id,
            alg,
            path_height,
        })
    }

    /// SHA-256 with a 256-level tree.
    pub fn default_profile() -> Self {
        HashConfig {
            alg_id: Self::DEFAULT_ALG_ID,
            alg: HashAlg::Sha256,
            path_height: 256,
        }
    }

    /// SHA-256 with an 8-level tree, small enough for a dense oracle.
    pub fn toy() -> Self {
        HashConfig {
            alg_id: Self::TOY_ALG_ID,
            alg: HashAlg::Sha256,
            path_height: 8,
        }
    }

    /// SHA-1 with a 160-level tree (20-byte digests).
    pub fn sha1_compat() -> Self {
        HashConfig {
            alg_id: Self::SHA1_COMPAT_ALG_ID,
            alg: HashAlg::Sha1,
            path_height: 160,
        }
    }

    /// Deliberately broken 16-bit hash with a 16-level tree. Test use only.
    pub fn weak16() -> Self {
        HashConfig {
            alg_id: Self::WEAK16_ALG_ID,
            alg: HashAlg::Sha256Trunc16,
            path_height: 16,
        }
    }

    pub fn from_alg_id(alg_id: u8) -> Result<Self, HashError> {
        match alg_id {
            Self::DEFAULT_ALG_ID => Ok(Self::default_profile()),
            Self::SHA1_COMPAT_ALG_ID => Ok(Self::sha1_compat()),
            Self::WEAK16_ALG_ID => Ok(Self::weak16()),
            Self::TOY_ALG_ID => Ok(Self::toy()),
            other => Err(HashError::UnknownAlgId(other)),
        }
    }

    /// Same algorithm with a different path height.
    pub fn with_path_height(self, path_height: usize) -> Result<Self, HashError> {
        Self::new(self.alg_id, self.alg, path_height)
    }

    pub fn alg_id(&self) -> u8 {
        self.alg_id
    }

    pub fn alg(&self) -> HashAlg {
        self.alg
    }

    /// `L`, in bytes.
    pub fn digest_len(&self) -> usize {
        self.alg.output_len()
    }

    /// `H`, in bits.
    pub fn path_height(&self) -> usize {
        self.path_height
    }

    pub fn digest(&self, data: &[u8]) -> Digest {
        self.digest_parts(&[data])
    }

    /// Digest of `left ‖ right`.
    pub fn digest_pair(&self, left: &Digest, right: &Digest) -> Digest {
        self.digest_parts(&[left.as_bytes(), right.as_bytes()])
    }

    /// Digest of the concatenation of `parts`.
    pub fn digest_parts(&self, parts: &[&[u8]]) -> Digest {
        count_call(parts.iter().map(|p| p.len()).sum());
        match self.alg {
            HashAlg::Sha256 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                Digest::from_slice(&h.finalize()).expect("32-byte output")
            }
            HashAlg::Sha1 => {
                let mut h = Sha1::new();
                for p in parts {
                    h.update(p);
                }
                Digest::from_slice(&h.finalize()).expect("20-byte output")
            }
            HashAlg::Sha256Trunc16 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                Digest::from_slice(&h.finalize()[..2]).expect("2-byte output")
            }
        }
    }

    /// First `H` bits of `digest(key)`.
    pub fn key_path(&self, key: &[u8]) -> PathBits {
        PathBits::new(self.digest(key), 0, self.path_height)
    }

    /// Parses exactly `L` bytes as a digest of this profile.
    pub fn digest_from_bytes(&self, bytes: &[u8]) -> Option<Digest> {
        if bytes.len() != self.digest_len() {
            return None;
        }
        Digest::from_slice(bytes)
    }
}

/// A hash output. Copyable; holds up to [`MAX_DIGEST_LEN`] bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest {
    bytes: [u8; MAX_DIGEST_LEN],
    len: u8,
}

impl Digest {
    /// Wraps `bytes`; `None` if empty or longer than [`MAX_DIGEST_LEN`].
    pub fn from_slice(bytes: &[u8]) -> Option<Digest> {
        if bytes.is_empty() || bytes.len() > MAX_DIGEST_LEN {
            return None;
        }
        let mut buf = [0u8; MAX_DIGEST_LEN];
        buf[..bytes.len()].copy_from_slice(bytes);
        Some(Digest {
            bytes: buf,
            len: bytes.len() as u8,
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }

    /// Bit `i` counted from the most significant bit of byte 0.
    pub fn bit(&self, i: usize) -> bool {
        (self.as_bytes()[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    /// Returns a copy with byte `index` replaced. Panics if out of range.
    pub fn with_byte(mut self, index: usize, value: u8) -> Digest {
        assert!(index < self.len());
        self.bytes[index] = value;
        self
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        self.as_bytes()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A window `[start, end)` onto the bits of a key digest.
///
/// A full key path has `start == 0` and `end == H`. Leaf entries keep the
/// suffix below their node; moving an entry up or down the tree only moves
/// `start`, the underlying key digest never changes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathBits {
    source: Digest,
    start: u16,
    end: u16,
}

impl PathBits {
    fn new(source: Digest, start: usize, end: usize) -> PathBits {
        assert!(start <= end && end <= source.len() * 8);
        PathBits {
            source,
            start: start as u16,
            end: end as u16,
        }
    }

    /// Packs explicit bits into a path starting at absolute position 0.
    pub fn from_bits(bits: &[bool]) -> PathBits {
        assert!(
            !bits.is_empty() && bits.len() <= MAX_DIGEST_LEN * 8,
            "path must hold 1..=256 bits"
        );
        let mut bytes = vec![0u8; bits.len().div_ceil(8)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        PathBits::new(
            Digest::from_slice(&bytes).expect("non-empty"),
            0,
            bits.len(),
        )
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Absolute position of the first bit in the full key path (the depth
    /// of the node this suffix hangs below).
    pub fn start(&self) -> usize {
        self.start as usize
    }

    pub fn end(&self) -> usize {
        self.end as usize
    }

    /// Bit `i` of this window.
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit {i} out of range {}", self.len());
        self.source.bit(self.start as usize + i)
    }

    /// Bit at absolute position `pos` of the underlying key path.
    pub fn at(&self, pos: usize) -> bool {
        assert!(pos < self.end as usize);
        self.source.bit(pos)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = bool> + ExactSizeIterator + '_ {
        (self.start..self.end).map(move |i| self.source.bit(i as usize))
    }

    pub fn to_vec(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Window of the same key path over absolute positions `[start, end)`.
    pub fn window(&self, start: usize, end: usize) -> PathBits {
        assert!(end <= self.end as usize, "window past end of path");
        PathBits::new(self.source, start, end)
    }

    /// The same path from absolute position `start` to the end.
    pub fn from_position(&self, start: usize) -> PathBits {
        self.window(start, self.end as usize)
    }

    /// True if both windows denote the same leaf, i.e. the underlying key
    /// paths agree on every bit up to `end`.
    pub fn same_leaf(&self, other: &PathBits) -> bool {
        self.end == other.end && self.first_difference(other, 0).is_none()
    }

    /// First absolute position `>= from` where the two key paths disagree.
    pub fn first_difference(&self, other: &PathBits, from: usize) -> Option<usize> {
        let end = self.end.min(other.end) as usize;
        (from..end).find(|&i| self.source.bit(i) != other.source.bit(i))
    }
}

impl fmt::Debug for PathBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PathBits[{}..{}](", self.start, self.end)?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

/// Roots of all-empty sub-trees, indexed by height: `E[0] = h("")`,
/// `E[i] = h(E[i-1] ‖ E[i-1])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmptyTable {
    levels: Vec<Digest>,
}

impl EmptyTable {
    pub fn build(cfg: &HashConfig) -> EmptyTable {
        let mut levels = Vec::with_capacity(cfg.path_height() + 1);
        levels.push(cfg.digest(b""));
        for i in 1..=cfg.path_height() {
            let below = levels[i - 1];
            levels.push(cfg.digest_pair(&below, &below));
        }
        EmptyTable { levels }
    }

    /// Root of an empty sub-tree of height `height`.
    pub fn get(&self, height: usize) -> Digest {
        self.levels[height]
    }

    /// Number of entries, `H + 1`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `E[H]`, the root of the empty tree.
    pub fn root(&self) -> Digest {
        *self.levels.last().expect("table has H+1 entries")
    }

    pub fn as_slice(&self) -> &[Digest] {
        &self.levels
    }
}

/// Hashes `child` with `sibling` ordered by `bit`: a zero bit puts `child`
/// on the left.
pub fn hash_ordered(cfg: &HashConfig, bit: bool, child: &Digest, sibling: &Digest) -> Digest {
    if bit {
        cfg.digest_pair(sibling, child)
    } else {
        cfg.digest_pair(child, sibling)
    }
}
