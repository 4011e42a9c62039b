//! A database that lies to readers.
//!
//! Wraps an honest [`Database`]: writes go through untouched, GET answers
//! are rewritten according to one of five attacks.

use std::sync::{Arc, Mutex};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::credentials::{sign_entry_value, WriterKeypair};
use crate::hash::EmptyTable;
use crate::proof::{HashPair, PathProof, Reply};
use crate::services::db::{Database, DbState};
use crate::services::wire::{Request, Response};
use crate::services::Service;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attack {
    /// Alters bytes of an existing value.
    Change = 1,
    /// Invents an entry signed with a key no writer owns.
    Forge = 2,
    /// Serves another key's genuine entry.
    Relabel = 3,
    /// Serves an entry and path from an earlier snapshot.
    Replay = 4,
    /// Claims a present key is absent.
    Deny = 5,
}

impl Attack {
    pub const ALL: [Attack; 5] = [
        Attack::Change,
        Attack::Forge,
        Attack::Relabel,
        Attack::Replay,
        Attack::Deny,
    ];

    pub fn from_number(n: u8) -> Option<Attack> {
        Attack::ALL.get(n.checked_sub(1)? as usize).copied()
    }
}

pub struct MaliciousDb {
    inner: Arc<Database>,
    attack: Attack,
    attacker: WriterKeypair,
    snapshot: Mutex<Option<DbState>>,
    rng: Mutex<StdRng>,
}

impl MaliciousDb {
    pub fn new(inner: Arc<Database>, attack: Attack, seed: u64) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let attacker = WriterKeypair::generate("mallory", &mut rng).expect("short id");
        MaliciousDb {
            inner,
            attack,
            attacker,
            snapshot: Mutex::new(None),
            rng: Mutex::new(rng),
        }
    }

    pub fn attack(&self) -> Attack {
        self.attack
    }

    pub fn inner(&self) -> &Arc<Database> {
        &self.inner
    }

    /// Remembers the current state for later replay.
    pub fn take_snapshot(&self) {
        *self.snapshot.lock().unwrap_or_else(|e| e.into_inner()) = Some(self.inner.snapshot());
    }

    fn rng(&self) -> std::sync::MutexGuard<'_, StdRng> {
        self.rng.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// The lying GET.
    pub fn get(&self, key: &[u8]) -> (Reply, PathProof) {
        let (reply, proof) = self.inner.get(key);
        match self.attack {
            Attack::Change => match reply {
                Reply::Present(mut v) => {
                    let mut rng = self.rng();
                    let i = rng.gen_range(0..v.len());
                    v[i] ^= rng.gen_range(1..=255u8);
                    (Reply::Present(v), proof)
                }
                absent => (absent, proof),
            },
            Attack::Forge => {
                let data: [u8; 16] = self.rng().gen();
                let sev = sign_entry_value(key, &data, &self.attacker);
                (Reply::Present(sev.encode()), proof)
            }
            Attack::Relabel => {
                let state = self.inner.read();
                let others: Vec<&Vec<u8>> = state.keys().filter(|k| k.as_slice() != key).collect();
                if others.is_empty() {
                    return (reply, proof);
                }
                let other = others[self.rng().gen_range(0..others.len())];
                let sev = state.entry(other).expect("listed key");
                (Reply::Present(sev.encode()), proof)
            }
            Attack::Replay => match &*self.snapshot.lock().unwrap_or_else(|e| e.into_inner()) {
                Some(old) => old.get(key),
                None => (reply, proof),
            },
            Attack::Deny => {
                let snap = self.snapshot.lock().unwrap_or_else(|e| e.into_inner());
                if let Some(old) = &*snap {
                    if old.entry(key).is_none() && self.rng().gen_bool(0.5) {
                        // a genuine absence proof, just not a current one
                        return (Reply::Absent, old.rootpath(key));
                    }
                }
                (Reply::Absent, blank_leaf(&self.inner, key, proof))
            }
        }
    }
}

/// The honest path with the on-path leaf replaced by `E[0]`.
fn blank_leaf(db: &Database, key: &[u8], mut proof: PathProof) -> PathProof {
    let cfg = db.cfg();
    let empty = EmptyTable::build(&cfg).get(0);
    let path = cfg.key_path(key);
    if let Some(last) = proof.pairs.last_mut() {
        let bit = path.get(path.len() - 1);
        *last = HashPair::ordered(bit, empty, last.get(!bit));
    }
    proof
}

impl Service for MaliciousDb {
    fn handle(&self, body: &[u8]) -> Vec<u8> {
        match Request::decode(body) {
            Ok(Request::Get { key }) => {
                let (reply, proof) = self.get(&key);
                Response::Entry { reply, proof }.encode()
            }
            _ => self.inner.handle(body),
        }
    }
}
