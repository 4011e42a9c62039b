//! Endpoint wrappers that fail or corrupt one chosen call.

use std::collections::HashMap;
use std::io;
use std::sync::Mutex;

use crate::client::{AnnounceEndpoint, ClientError, DbEndpoint};
use crate::credentials::StateCredential;
use crate::hash::Digest;
use crate::proof::{PathProof, Reply};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultOp {
    Fetch,
    Get,
    Rootpath,
    Put,
    Delete,
    Publish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The call fails. A mutation still reaches the database and only its
    /// acknowledgement is lost; a publish is never sent.
    Fail,
    /// The answer is altered: a flipped proof or root byte, or for publish a
    /// lost acknowledgement after the slot was written.
    Corrupt,
}

/// Fault `fault` hits the `nth` call (0-based) of `op`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultPlan {
    pub op: FaultOp,
    pub nth: usize,
    pub fault: Fault,
}

#[derive(Debug, Default)]
struct Counter {
    plan: Option<FaultPlan>,
    calls: Mutex<HashMap<FaultOp, usize>>,
}

impl Counter {
    fn hit(&self, op: FaultOp) -> Option<Fault> {
        let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        let n = calls.entry(op).or_insert(0);
        let this = *n;
        *n += 1;
        match self.plan {
            Some(p) if p.op == op && p.nth == this => Some(p.fault),
            _ => None,
        }
    }

    fn fired(&self) -> bool {
        let calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        self.plan
            .is_some_and(|p| calls.get(&p.op).copied().unwrap_or(0) > p.nth)
    }
}

fn injected() -> ClientError {
    ClientError::Io(io::Error::new(io::ErrorKind::ConnectionReset, "injected fault"))
}

fn flip(d: Digest) -> Digest {
    d.with_byte(0, d.as_bytes()[0] ^ 0x01)
}

pub struct FaultyDb<D> {
    inner: D,
    counter: Counter,
}

impl<D> FaultyDb<D> {
    pub fn new(inner: D, plan: Option<FaultPlan>) -> Self {
        FaultyDb {
            inner,
            counter: Counter {
                plan,
                ..Counter::default()
            },
        }
    }

    pub fn fired(&self) -> bool {
        self.counter.fired()
    }
}

fn corrupt_proof(mut p: PathProof) -> PathProof {
    let mid = p.pairs.len() / 2;
    if let Some(pair) = p.pairs.get_mut(mid) {
        pair.left = flip(pair.left);
    }
    p
}

impl<D: DbEndpoint> DbEndpoint for FaultyDb<D> {
    fn get(&self, key: &[u8]) -> Result<(Reply, PathProof), ClientError> {
        let fault = self.counter.hit(FaultOp::Get);
        let (reply, proof) = self.inner.get(key)?;
        match fault {
            None => Ok((reply, proof)),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => Ok((reply, corrupt_proof(proof))),
        }
    }

    fn put(&self, key: &[u8], value: &[u8]) -> Result<Digest, ClientError> {
        let fault = self.counter.hit(FaultOp::Put);
        let root = self.inner.put(key, value)?;
        match fault {
            None => Ok(root),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => Ok(flip(root)),
        }
    }

    fn delete(&self, key: &[u8]) -> Result<Digest, ClientError> {
        let fault = self.counter.hit(FaultOp::Delete);
        let root = self.inner.delete(key)?;
        match fault {
            None => Ok(root),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => Ok(flip(root)),
        }
    }

    fn rootpath(&self, key: &[u8]) -> Result<PathProof, ClientError> {
        let fault = self.counter.hit(FaultOp::Rootpath);
        let proof = self.inner.rootpath(key)?;
        match fault {
            None => Ok(proof),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => Ok(corrupt_proof(proof)),
        }
    }

    fn root(&self) -> Result<Digest, ClientError> {
        self.inner.root()
    }
}

pub struct FaultyAnnounce<A> {
    inner: A,
    counter: Counter,
}

impl<A> FaultyAnnounce<A> {
    pub fn new(inner: A, plan: Option<FaultPlan>) -> Self {
        FaultyAnnounce {
            inner,
            counter: Counter {
                plan,
                ..Counter::default()
            },
        }
    }

    pub fn fired(&self) -> bool {
        self.counter.fired()
    }
}

impl<A: AnnounceEndpoint> AnnounceEndpoint for FaultyAnnounce<A> {
    fn fetch(&self) -> Result<Option<StateCredential>, ClientError> {
        let fault = self.counter.hit(FaultOp::Fetch);
        let cred = self.inner.fetch()?;
        match fault {
            None => Ok(cred),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => Ok(cred.map(|mut c| {
                c.root = flip(c.root);
                c
            })),
        }
    }

    fn publish(&self, cred: &StateCredential) -> Result<(), ClientError> {
        match self.counter.hit(FaultOp::Publish) {
            None => self.inner.publish(cred),
            Some(Fault::Fail) => Err(injected()),
            Some(Fault::Corrupt) => {
                self.inner.publish(cred)?;
                Err(injected())
            }
        }
    }
}
