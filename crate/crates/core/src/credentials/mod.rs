//! Writer signatures: signed state credentials, signed entry values and key
//! files.
//!
//! A state credential is the writer-signed summary of the database: the root
//! of the keyed hash tree plus a sequence number. An entry value carries the
//! writer's signature over the key it is stored under and its data, so a
//! reader can detect values that were altered or moved to another key.
//!
//! Signatures are Ed25519.

pub mod baseline;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::RngCore;
use thiserror::Error;

use crate::codec::{put_bytes32, CodecError, Reader};
use crate::hash::{Digest, HashConfig};

pub use baseline::{
    chain_credential_extend, chain_genesis, forest_append, simple_hash_credential, ForestCredential,
};

/// Magic header of a public key file.
pub const PUBLIC_KEY_MAGIC: [u8; 4] = *b"KHP1";
/// Magic header of a secret key file.
pub const SECRET_KEY_MAGIC: [u8; 4] = *b"KHS1";

pub const MAX_WRITER_ID_LEN: usize = 255;
/// Keys and data of entry values follow the wire limits.
pub const MAX_ENTRY_KEY_LEN: usize = 64 * 1024;
pub const MAX_ENTRY_DATA_LEN: usize = 1024 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CredentialError {
    #[error("unknown writer {}", String::from_utf8_lossy(.0))]
    UnknownWriter(Vec<u8>),
    #[error("signature does not verify")]
    BadSignature,
    #[error("entry was signed for a different key")]
    KeyMismatch,
    #[error("writer id longer than {MAX_WRITER_ID_LEN} bytes")]
    WriterIdTooLong,
    #[error("malformed encoding: {0}")]
    Malformed(#[from] CodecError),
    #[error("unknown profile in credential: {0:#04x}")]
    UnknownProfile(u8),
}

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}: bad key file")]
    BadFormat(String),
}

/// A writer's identity and signing key.
#[derive(Clone)]
pub struct WriterKeypair {
    id: Vec<u8>,
    signing: SigningKey,
}

impl std::fmt::Debug for WriterKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WriterKeypair")
            .field("id", &String::from_utf8_lossy(&self.id))
            .finish_non_exhaustive()
    }
}

impl WriterKeypair {
    pub fn generate<R: RngCore>(id: impl Into<Vec<u8>>, rng: &mut R) -> Result<Self, CredentialError> {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        Self::from_secret(id, secret)
    }

    pub fn from_secret(id: impl Into<Vec<u8>>, secret: [u8; 32]) -> Result<Self, CredentialError> {
        let id = id.into();
        if id.len() > MAX_WRITER_ID_LEN {
            return Err(CredentialError::WriterIdTooLong);
        }
        Ok(WriterKeypair {
            id,
            signing: SigningKey::from_bytes(&secret),
        })
    }

    pub fn id(&self) -> &[u8] {
        &self.id
    }

    pub fn public_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    pub fn sign(&self, msg: &[u8]) -> Vec<u8> {
        self.signing.sign(msg).to_bytes().to_vec()
    }

    pub fn secret_file_bytes(&self) -> Vec<u8> {
        let mut out = SECRET_KEY_MAGIC.to_vec();
        out.extend_from_slice(&self.signing.to_bytes());
        out
    }

    pub fn public_file_bytes(&self) -> Vec<u8> {
        let mut out = PUBLIC_KEY_MAGIC.to_vec();
        out.extend_from_slice(self.public_key().as_bytes());
        out
    }

    pub fn from_secret_file_bytes(id: impl Into<Vec<u8>>, bytes: &[u8]) -> Result<Self, KeyFileError> {
        let id = id.into();
        let name = String::from_utf8_lossy(&id).into_owned();
        let raw = bytes
            .strip_prefix(&SECRET_KEY_MAGIC)
            .and_then(|b| <[u8; 32]>::try_from(b).ok())
            .ok_or_else(|| KeyFileError::BadFormat(name.clone()))?;
        Self::from_secret(id, raw).map_err(|_| KeyFileError::BadFormat(name))
    }

    /// Writes `<id>.sec` and `<id>.pub` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), KeyFileError> {
        fs::create_dir_all(dir)?;
        let name = String::from_utf8_lossy(&self.id).into_owned();
        fs::write(dir.join(format!("{name}.sec")), self.secret_file_bytes())?;
        fs::write(dir.join(format!("{name}.pub")), self.public_file_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path, id: &str) -> Result<Self, KeyFileError> {
        let bytes = fs::read(dir.join(format!("{id}.sec")))?;
        Self::from_secret_file_bytes(id.as_bytes().to_vec(), &bytes)
    }
}

fn verifying_key_from_file_bytes(bytes: &[u8]) -> Option<VerifyingKey> {
    let raw = <[u8; 32]>::try_from(bytes.strip_prefix(&PUBLIC_KEY_MAGIC)?).ok()?;
    VerifyingKey::from_bytes(&raw).ok()
}

/// Public keys of all writers, held by readers out of band.
#[derive(Debug, Clone, Default)]
pub struct KeyRing {
    keys: BTreeMap<Vec<u8>, VerifyingKey>,
}

impl KeyRing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<Vec<u8>>, key: VerifyingKey) {
        self.keys.insert(id.into(), key);
    }

    pub fn add_writer(&mut self, writer: &WriterKeypair) {
        self.insert(writer.id().to_vec(), writer.public_key());
    }

    pub fn get(&self, id: &[u8]) -> Option<&VerifyingKey> {
        self.keys.get(id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Loads every `<id>.pub` in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, KeyFileError> {
        let mut ring = KeyRing::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("pub") {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| KeyFileError::BadFormat(path.display().to_string()))?
                .to_owned();
            let key = verifying_key_from_file_bytes(&fs::read(&path)?)
                .ok_or_else(|| KeyFileError::BadFormat(path.display().to_string()))?;
            ring.insert(id.into_bytes(), key);
        }
        Ok(ring)
    }

    fn verify(&self, id: &[u8], msg: &[u8], signature: &[u8]) -> Result<(), CredentialError> {
        let key = self
            .get(id)
            .ok_or_else(|| CredentialError::UnknownWriter(id.to_vec()))?;
        let sig = Signature::from_slice(signature).map_err(|_| CredentialError::BadSignature)?;
        key.verify_strict(msg, &sig)
            .map_err(|_| CredentialError::BadSignature)
    }
}

/// Signed `(root, seq)` published on the announcement service.
///
/// Wire form: `alg_id(1) ‖ seq(8) ‖ root(L) ‖ writer_id_len(1) ‖ writer_id ‖
/// sig_len(2) ‖ signature`; the signature covers everything before
/// `sig_len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateCredential {
    pub alg_id: u8,
    pub seq: u64,
    pub root: Digest,
    pub writer_id: Vec<u8>,
    pub signature: Vec<u8>,
}

impl StateCredential {
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.root.len() + self.writer_id.len());
        out.push(self.alg_id);
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(self.root.as_bytes());
        out.push(self.writer_id.len() as u8);
        out.extend_from_slice(&self.writer_id);
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.signed_bytes();
        out.extend_from_slice(&(self.signature.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CredentialError> {
        let mut r = Reader::new(bytes);
        let cred = Self::read(&mut r)?;
        r.finish()?;
        Ok(cred)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, CredentialError> {
        let alg_id = r.u8()?;
        let cfg = HashConfig::from_alg_id(alg_id).map_err(|_| CredentialError::UnknownProfile(alg_id))?;
        let seq = r.u64()?;
        let root = Digest::from_slice(r.take(cfg.digest_len())?).expect("digest length");
        let id_len = r.u8()? as usize;
        let writer_id = r.take(id_len)?.to_vec();
        let sig_len = r.u16()? as usize;
        let signature = r.take(sig_len)?.to_vec();
        Ok(StateCredential {
            alg_id,
            seq,
            root,
            writer_id,
            signature,
        })
    }

    /// The implicit credential of an empty system: seq 0 over `E[H]`.
    /// It carries no signature and is never published.
    pub fn genesis(cfg: &HashConfig, empty_root: Digest) -> Self {
        StateCredential {
            alg_id: cfg.alg_id(),
            seq: 0,
            root: empty_root,
            writer_id: Vec::new(),
            signature: Vec::new(),
        }
    }
}

pub fn sign_credential(
    cfg: &HashConfig,
    root: Digest,
    seq: u64,
    writer: &WriterKeypair,
) -> StateCredential {
    let mut cred = StateCredential {
        alg_id: cfg.alg_id(),
        seq,
        root,
        writer_id: writer.id().to_vec(),
        signature: Vec::new(),
    };
    cred.signature = writer.sign(&cred.signed_bytes());
    cred
}

pub fn verify_credential(cred: &StateCredential, keys: &KeyRing) -> Result<(), CredentialError> {
    keys.verify(&cred.writer_id, &cred.signed_bytes(), &cred.signature)
}

/// An entry value: data plus the author's signature over
/// `key_len(4) ‖ key ‖ data`.
///
/// The key the author signed for travels with the value, so a reader can
/// tell a value moved from another key apart from altered bytes.
///
/// Encoding: `key_len(4) ‖ key ‖ data_len(4) ‖ data ‖ author_len(1) ‖
/// author_id ‖ sig_len(2) ‖ signature`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedEntryValue {
    pub key: Vec<u8>,
    pub data: Vec<u8>,
    pub author_id: Vec<u8>,
    pub signature: Vec<u8>,
}

fn entry_message(key: &[u8], data: &[u8]) -> Vec<u8> {
    let mut msg = Vec::with_capacity(4 + key.len() + data.len());
    put_bytes32(&mut msg, key);
    msg.extend_from_slice(data);
    msg
}

impl SignedEntryValue {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            11 + self.key.len() + self.data.len() + self.author_id.len() + self.signature.len(),
        );
        put_bytes32(&mut out, &self.key);
        put_bytes32(&mut out, &self.data);
        out.push(self.author_id.len() as u8);
        out.extend_from_slice(&self.author_id);
        out.extend_from_slice(&(self.signature.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CredentialError> {
        let mut r = Reader::new(bytes);
        let key = r.bytes32(MAX_ENTRY_KEY_LEN)?.to_vec();
        let data = r.bytes32(MAX_ENTRY_DATA_LEN)?.to_vec();
        let n = r.u8()? as usize;
        let author_id = r.take(n)?.to_vec();
        let n = r.u16()? as usize;
        let signature = r.take(n)?.to_vec();
        r.finish()?;
        Ok(SignedEntryValue {
            key,
            data,
            author_id,
            signature,
        })
    }

    /// Digest stored in the tree leaf.
    pub fn leaf_digest(&self, cfg: &HashConfig) -> Digest {
        cfg.digest(&self.encode())
    }
}

pub fn sign_entry_value(key: &[u8], data: &[u8], author: &WriterKeypair) -> SignedEntryValue {
    SignedEntryValue {
        key: key.to_vec(),
        data: data.to_vec(),
        author_id: author.id().to_vec(),
        signature: author.sign(&entry_message(key, data)),
    }
}

/// Checks the author signature, then that the entry was signed for `key`.
pub fn verify_entry_value(
    key: &[u8],
    sev: &SignedEntryValue,
    keys: &KeyRing,
) -> Result<(), CredentialError> {
    keys.verify(&sev.author_id, &entry_message(&sev.key, &sev.data), &sev.signature)?;
    if sev.key != key {
        return Err(CredentialError::KeyMismatch);
    }
    Ok(())
}
