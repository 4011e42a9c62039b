//! The writer pipeline.
//!
//! For every mutation the writer
//! 1. fetches and verifies the current credential,
//! 2. asks the database for the key's path,
//! 3. checks the path against the credential root,
//! 4. signs the new entry value,
//! 5. recomputes the root locally from the path,
//! 6. sends the mutation,
//! 7. requires the database's new root to equal its own, and
//! 8. signs and publishes the next credential.
//!
//! A credential is only ever published for a root the writer derived itself
//! from a verified path.

use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::client::{AnnounceEndpoint, ClientError, DbEndpoint};
use crate::credentials::{
    sign_credential, sign_entry_value, verify_credential, CredentialError, KeyRing,
    StateCredential, WriterKeypair,
};
use crate::hash::{Digest, EmptyTable, HashConfig};
use crate::proof::{updated_root, verify_path, InvalidReason, PathProof, VerifyOutcome};
use crate::services::wire::Status;

#[derive(Debug, Error)]
pub enum WriterError {
    #[error("{0}")]
    Client(#[from] ClientError),
    #[error("current credential does not verify: {0}")]
    BadCredential(CredentialError),
    #[error("credential is for profile {0:#04x}")]
    WrongProfile(u8),
    #[error("database path does not match the credential: {0:?}")]
    BadProof(InvalidReason),
    #[error("key is not present")]
    NotPresent,
    #[error("database reported root {got}, expected {expected}")]
    RootMismatch { expected: Digest, got: Digest },
    #[error("could not reconcile with concurrent writers")]
    Conflict,
}

impl WriterError {
    /// True when the database or announcement service misbehaved.
    pub fn is_misbehavior(&self) -> bool {
        matches!(
            self,
            WriterError::BadProof(_) | WriterError::RootMismatch { .. } | WriterError::BadCredential(_)
        )
    }
}

pub struct WriterSession<D, A> {
    cfg: HashConfig,
    empties: EmptyTable,
    writer: WriterKeypair,
    keys: KeyRing,
    db: D,
    announce: A,
    /// Attempts when the database is ahead of the credential because of
    /// another writer.
    pub retries: usize,
    pub backoff: Duration,
}

struct Observed {
    cred: StateCredential,
    proof: PathProof,
    old_leaf: Digest,
}

impl<D: DbEndpoint, A: AnnounceEndpoint> WriterSession<D, A> {
    /// `keys` must hold every writer's public key, including this one's.
    pub fn new(cfg: HashConfig, writer: WriterKeypair, keys: KeyRing, db: D, announce: A) -> Self {
        WriterSession {
            empties: EmptyTable::build(&cfg),
            cfg,
            writer,
            keys,
            db,
            announce,
            retries: 20,
            backoff: Duration::from_millis(5),
        }
    }

    pub fn db(&self) -> &D {
        &self.db
    }

    pub fn announce(&self) -> &A {
        &self.announce
    }

    pub fn writer(&self) -> &WriterKeypair {
        &self.writer
    }

    /// Latest verified credential, or genesis for an empty system.
    pub fn current_credential(&self) -> Result<StateCredential, WriterError> {
        match self.announce.fetch()? {
            None => Ok(StateCredential::genesis(&self.cfg, self.empties.root())),
            Some(c) => {
                if c.alg_id != self.cfg.alg_id() {
                    return Err(WriterError::WrongProfile(c.alg_id));
                }
                verify_credential(&c, &self.keys).map_err(WriterError::BadCredential)?;
                Ok(c)
            }
        }
    }

    /// Steps 1 to 3, retried while another writer's change is pending.
    fn observe(&self, key: &[u8]) -> Result<Observed, WriterError> {
        let path = self.cfg.key_path(key);
        let mut attempt = 0;
        loop {
            let cred = self.current_credential()?;
            let proof = self.db.rootpath(key)?;
            match verify_path(&self.cfg, &cred.root, &path, &proof) {
                VerifyOutcome::Valid => {
                    let old_leaf = proof.leaf(&path).expect("verified proof has H pairs");
                    return Ok(Observed {
                        cred,
                        proof,
                        old_leaf,
                    });
                }
                // a consistent path to an unpublished root may be another
                // writer's change in flight
                VerifyOutcome::Invalid(InvalidReason::RootMismatch) if attempt < self.retries => {
                    attempt += 1;
                    thread::sleep(self.backoff);
                }
                VerifyOutcome::Invalid(r) => return Err(WriterError::BadProof(r)),
            }
        }
    }

    pub fn writer_put(&self, key: &[u8], data: &[u8]) -> Result<StateCredential, WriterError> {
        let seen = self.observe(key)?;
        let sev = sign_entry_value(key, data, &self.writer);
        let value = sev.encode();
        let new_leaf = self.cfg.digest(&value);
        self.commit(key, seen, new_leaf, |db| db.put(key, &value))
    }

    pub fn writer_delete(&self, key: &[u8]) -> Result<StateCredential, WriterError> {
        let seen = self.observe(key)?;
        if seen.old_leaf == self.empties.get(0) {
            return Err(WriterError::NotPresent);
        }
        let new_leaf = self.empties.get(0);
        self.commit(key, seen, new_leaf, |db| db.delete(key))
    }

    /// Steps 5 to 8.
    fn commit(
        &self,
        key: &[u8],
        seen: Observed,
        new_leaf: Digest,
        send: impl FnOnce(&D) -> Result<Digest, ClientError>,
    ) -> Result<StateCredential, WriterError> {
        let expected = updated_root(&self.cfg, key, &seen.proof, new_leaf)
            .map_err(|_| WriterError::BadProof(InvalidReason::BadLength))?;
        let got = send(&self.db)?;
        if got != expected {
            return self.reconcile(key, &seen, new_leaf, got, expected);
        }
        let cred = sign_credential(&self.cfg, expected, seen.cred.seq + 1, &self.writer);
        match self.announce.publish(&cred) {
            Ok(()) => Ok(cred),
            Err(ClientError::Status(Status::RejectStale)) => {
                self.reconcile(key, &seen, new_leaf, expected, expected)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// After a concurrent writer interleaved: waits until a newer credential
    /// appears and the database state equals it plus exactly this writer's
    /// change, then publishes that. Without a newer credential a root
    /// mismatch stays database misbehavior.
    fn reconcile(
        &self,
        key: &[u8],
        seen: &Observed,
        new_leaf: Digest,
        got: Digest,
        expected: Digest,
    ) -> Result<StateCredential, WriterError> {
        let path = self.cfg.key_path(key);
        for _ in 0..=self.retries {
            let cred = self.current_credential()?;
            let proof = self.db.rootpath(key)?;
            let root = match proof.root(&self.cfg) {
                Some(r) if proof.first_chain_break(&self.cfg, &path).is_none() => r,
                _ => return Err(WriterError::RootMismatch { expected, got }),
            };
            if proof.leaf(&path) != Some(new_leaf) {
                return Err(WriterError::RootMismatch { expected, got });
            }
            if cred.seq > seen.cred.seq && root == cred.root {
                // already covered by a published credential
                return Ok(cred);
            }
            let before = updated_root(&self.cfg, key, &proof, seen.old_leaf)
                .map_err(|_| WriterError::RootMismatch { expected, got })?;
            if cred.seq > seen.cred.seq && before == cred.root {
                let next = sign_credential(&self.cfg, root, cred.seq + 1, &self.writer);
                match self.announce.publish(&next) {
                    Ok(()) => return Ok(next),
                    Err(ClientError::Status(Status::RejectStale)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            thread::sleep(self.backoff);
        }
        if got != expected {
            Err(WriterError::RootMismatch { expected, got })
        } else {
            Err(WriterError::Conflict)
        }
    }
}
