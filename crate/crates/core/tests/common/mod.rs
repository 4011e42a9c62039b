#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use khtree::client::{Client, ReaderSession, WriterSession};
use khtree::credentials::{KeyRing, WriterKeypair};
use khtree::services::{AnnouncementService, Database};
use khtree::{Digest, HashConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Local<S> = Client<Arc<S>>;
pub type LocalWriter = WriterSession<Local<Database>, Local<AnnouncementService>>;
pub type LocalReader<D> = ReaderSession<Local<D>, Local<AnnouncementService>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Short random keys, pairwise distinct leaf positions.
pub fn distinct_keys(cfg: &HashConfig, n: usize, rng: &mut impl Rng) -> Vec<Vec<u8>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let len = rng.gen_range(1..12);
        let k: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        if seen.insert(cfg.key_path(&k).to_vec()) {
            out.push(k);
        }
    }
    out
}

pub fn writer(id: &str, seed: u64) -> WriterKeypair {
    WriterKeypair::generate(id, &mut rng(seed)).unwrap()
}

pub fn ring(ws: &[&WriterKeypair]) -> KeyRing {
    let mut r = KeyRing::new();
    for w in ws {
        r.add_writer(w);
    }
    r
}

/// An honest in-process system with one writer.
pub struct System {
    pub cfg: HashConfig,
    pub db: Arc<Database>,
    pub announce: Arc<AnnouncementService>,
    pub keys: KeyRing,
    pub writer: LocalWriter,
}

impl System {
    pub fn new(cfg: HashConfig, seed: u64) -> Self {
        let w = writer("alice", seed);
        let keys = ring(&[&w]);
        let db = Arc::new(Database::in_memory(cfg));
        let announce = Arc::new(AnnouncementService::new(keys.clone()));
        let writer = WriterSession::new(
            cfg,
            w,
            keys.clone(),
            Client::new(cfg, Arc::clone(&db)),
            Client::new(cfg, Arc::clone(&announce)),
        );
        System {
            cfg,
            db,
            announce,
            keys,
            writer,
        }
    }

    pub fn reader(&self) -> LocalReader<Database> {
        self.reader_via(Arc::clone(&self.db))
    }

    pub fn reader_via<S: khtree::services::Service>(&self, db: Arc<S>) -> LocalReader<S> {
        ReaderSession::new(
            self.cfg,
            self.keys.clone(),
            Client::new(self.cfg, db),
            Client::new(self.cfg, Arc::clone(&self.announce)),
        )
    }
}

/// Reference map used to rebuild the oracle.
pub fn entries_of(cfg: &HashConfig, m: &BTreeMap<Vec<u8>, Vec<u8>>) -> BTreeMap<Vec<u8>, Digest> {
    m.iter().map(|(k, v)| (k.clone(), cfg.digest(v))).collect()
}

/// An accepting and a rejecting attester proof for the same `(x, d)` under
/// the 16-bit profile, built by brute-forcing a leaf-level sibling `w` with
/// `h(E[0] ‖ w)` (or `h(w ‖ E[0])`) equal to the honest leaf-layer parent.
pub struct Engineered {
    pub x: Vec<u8>,
    pub d: Digest,
    pub accept: khtree::PathProof,
    pub reject: khtree::PathProof,
}

pub fn engineer_weak16(seed: u64) -> Engineered {
    use khtree::attester::{attester_d, attester_p, KeySet};
    use khtree::hash::hash_ordered;
    use khtree::proof::HashPair;
    let cfg = HashConfig::weak16();
    let e0 = khtree::EmptyTable::build(&cfg).get(0);
    let mut r = rng(seed);
    loop {
        let members = distinct_keys(&cfg, r.gen_range(1..8), &mut r);
        let x = members[0].clone();
        if cfg.digest(&x) == e0 {
            continue;
        }
        let set = KeySet::from_keys(cfg, &members).unwrap();
        let d = attester_d(&set);
        let accept = attester_p(&set, &x);
        let h = cfg.path_height();
        let bit = cfg.key_path(&x).get(h - 1);
        let z = accept.pairs[h - 1].parent(&cfg);
        let found = (0u32..1 << 16).find_map(|w| {
            let w = Digest::from_slice(&(w as u16).to_be_bytes()).unwrap();
            (hash_ordered(&cfg, bit, &e0, &w) == z).then_some(w)
        });
        if let Some(w) = found {
            let mut reject = accept.clone();
            reject.pairs[h - 1] = HashPair::ordered(bit, e0, w);
            return Engineered { x, d, accept, reject };
        }
    }
}

/// A `khtree` server process, killed on drop.
pub struct ServerProc {
    pub child: std::process::Child,
    pub addr: String,
}

impl ServerProc {
    /// Starts `khtree <args>` on an ephemeral port and waits for its
    /// `listening <addr> ...` line.
    pub fn start(args: &[&str]) -> Self {
        use std::io::BufRead;
        use std::process::{Command, Stdio};
        let mut child = Command::new(env!("CARGO_BIN_EXE_khtree"))
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn khtree");
        let mut line = String::new();
        let stdout = child.stdout.take().unwrap();
        std::io::BufReader::new(stdout).read_line(&mut line).unwrap();
        let addr = line
            .split_whitespace()
            .nth(1)
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
            .to_owned();
        ServerProc { child, addr }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ServerProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
