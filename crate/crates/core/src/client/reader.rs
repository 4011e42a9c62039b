//! Reader side: verify a reply and, if it fails, say which attack it looks
//! like.
//!
//! Checks run in a fixed order and the first failing one decides:
//! credential signature, proof shape, then for a present reply the entry
//! value (decoding, author signature, key binding) before the path. Which
//! failure maps to which attack is this crate's own taxonomy; telling a
//! stale entry from a changed one by the internal consistency of its path is
//! a heuristic.

use std::fmt;

use serde::Serialize;

use crate::client::{AnnounceEndpoint, ClientError, DbEndpoint};
use crate::credentials::{
    verify_credential, verify_entry_value, CredentialError, KeyRing, SignedEntryValue,
    StateCredential,
};
use crate::hash::{EmptyTable, HashConfig};
use crate::proof::{verify_reply, InvalidReason, PathProof, Reply, VerifyOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AttackKind {
    ChangedEntry,
    ForgedEntry,
    Relabeled,
    StaleEntry,
    DeniedEntry,
    BadCredential,
    BadProof,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifiedReply {
    VerifiedPresent { data: Vec<u8>, author_id: Vec<u8> },
    VerifiedAbsent,
    AttackDetected(AttackKind),
}

impl VerifiedReply {
    pub fn attack(&self) -> Option<AttackKind> {
        match self {
            VerifiedReply::AttackDetected(k) => Some(*k),
            _ => None,
        }
    }
}

/// Classifies one GET answer against an already verified credential root.
pub fn classify_reply(
    cfg: &HashConfig,
    empties: &EmptyTable,
    keys: &KeyRing,
    cred: &StateCredential,
    key: &[u8],
    reply: &Reply,
    proof: &PathProof,
) -> VerifiedReply {
    use AttackKind::*;
    let attack = VerifiedReply::AttackDetected;
    if proof.len() != cfg.path_height() {
        return attack(BadProof);
    }
    let outcome = verify_reply(cfg, empties, &cred.root, key, reply, proof);
    let value = match reply {
        Reply::Absent => {
            return match outcome {
                VerifyOutcome::Valid => VerifiedReply::VerifiedAbsent,
                VerifyOutcome::Invalid(InvalidReason::BadLength) => attack(BadProof),
                VerifyOutcome::Invalid(_) => attack(DeniedEntry),
            }
        }
        Reply::Present(v) => v,
    };
    // a bad signature is a forgery where the tree has no entry, an
    // alteration where it has one
    let leaf_empty = proof.leaf(&cfg.key_path(key)) == Some(empties.get(0));
    let unsigned = if leaf_empty { ForgedEntry } else { ChangedEntry };
    let sev = match SignedEntryValue::decode(value) {
        Ok(sev) => sev,
        Err(_) => return attack(unsigned),
    };
    match verify_entry_value(key, &sev, keys) {
        Ok(()) => {}
        Err(CredentialError::KeyMismatch) => return attack(Relabeled),
        Err(_) => return attack(unsigned),
    }
    match outcome {
        VerifyOutcome::Valid => VerifiedReply::VerifiedPresent {
            data: sev.data,
            author_id: sev.author_id,
        },
        VerifyOutcome::Invalid(InvalidReason::RootMismatch) => attack(StaleEntry),
        VerifyOutcome::Invalid(InvalidReason::BadLength) => attack(BadProof),
        VerifyOutcome::Invalid(_) => attack(ChangedEntry),
    }
}

pub struct ReaderSession<D, A> {
    cfg: HashConfig,
    empties: EmptyTable,
    keys: KeyRing,
    db: D,
    announce: A,
}

impl<D: DbEndpoint, A: AnnounceEndpoint> ReaderSession<D, A> {
    pub fn new(cfg: HashConfig, keys: KeyRing, db: D, announce: A) -> Self {
        ReaderSession {
            empties: EmptyTable::build(&cfg),
            cfg,
            keys,
            db,
            announce,
        }
    }

    /// The credential to check against; `Err` carries the attack verdict.
    fn credential(&self) -> Result<Result<StateCredential, AttackKind>, ClientError> {
        Ok(match self.announce.fetch()? {
            None => Ok(StateCredential::genesis(&self.cfg, self.empties.root())),
            Some(c) if c.alg_id != self.cfg.alg_id() => Err(AttackKind::BadCredential),
            Some(c) => match verify_credential(&c, &self.keys) {
                Ok(()) => Ok(c),
                Err(_) => Err(AttackKind::BadCredential),
            },
        })
    }

    /// Transport failures are `Err`; every answer, honest or not, is `Ok`.
    pub fn reader_get(&self, key: &[u8]) -> Result<VerifiedReply, ClientError> {
        let cred = match self.credential()? {
            Ok(c) => c,
            Err(kind) => return Ok(VerifiedReply::AttackDetected(kind)),
        };
        let (reply, proof) = self.db.get(key)?;
        Ok(classify_reply(
            &self.cfg,
            &self.empties,
            &self.keys,
            &cred,
            key,
            &reply,
            &proof,
        ))
    }
}
