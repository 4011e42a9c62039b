use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use khtree::attester::{attester_d, attester_p, attester_v, KeySet};
use khtree::bench::bench_suite;
use khtree::client::{
    Attack, AttackKind, Client, ClientError, MaliciousDb, ReaderSession, VerifiedReply,
    WriterError, WriterSession,
};
use khtree::credentials::{KeyRing, WriterKeypair};
use khtree::services::{self, AnnouncementService, Database};
use khtree::HashConfig;

mod exit {
    pub const OK: u8 = 0;
    pub const TRANSPORT: u8 = 3;
    pub const PROTOCOL: u8 = 4;
    pub const ATTACK: u8 = 5;
    pub const MISBEHAVIOR: u8 = 6;
    pub const CONFIG: u8 = 7;
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Profile {
    Default,
    Toy,
}

impl Profile {
    fn cfg(self) -> HashConfig {
        match self {
            Profile::Default => HashConfig::default_profile(),
            Profile::Toy => HashConfig::toy(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Profile::Default => "default",
            Profile::Toy => "toy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Text,
    Records,
}

#[derive(Parser)]
#[command(name = "khtree", version, about = "Keyed hash tree database, announcement service and clients")]
struct Cli {
    #[arg(long, global = true, env = "KHTREE_DB_ADDR", default_value = "127.0.0.1:7700")]
    db_addr: String,
    #[arg(long, global = true, env = "KHTREE_ANNOUNCE_ADDR", default_value = "127.0.0.1:7701")]
    announce_addr: String,
    #[arg(long, global = true, env = "KHTREE_KEYS_DIR", default_value = "keys")]
    keys_dir: PathBuf,
    #[arg(long, global = true, env = "KHTREE_PROFILE", value_enum, default_value = "default")]
    profile: Profile,
    #[arg(long, global = true, env = "KHTREE_OUTPUT", value_enum, default_value = "text")]
    output: Output,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the database on --db-addr.
    DbServe {
        /// Directory holding the replay log.
        #[arg(long, env = "KHTREE_DATA_DIR", default_value = "khtree-data")]
        data_dir: PathBuf,
    },
    /// Serve the announcement slot on --announce-addr.
    AnnounceServe,
    /// Create a writer keypair in --keys-dir.
    Keygen { id: String },
    /// Sign and store an entry, then publish the new credential.
    Put {
        #[arg(long, env = "KHTREE_WRITER")]
        writer: String,
        key: String,
        data: String,
    },
    /// Fetch and verify an entry or its absence.
    Get { key: String },
    /// Remove an entry, then publish the new credential.
    Delete {
        #[arg(long, env = "KHTREE_WRITER")]
        writer: String,
        key: String,
    },
    /// Run the attester on a key set given on the command line.
    Attest {
        /// The key to attest.
        key: String,
        /// Members of the set.
        #[arg(long = "member")]
        members: Vec<String>,
    },
    /// Emit benchmark records.
    Bench {
        #[arg(long = "n", default_values_t = [1024usize, 4096])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run one attack against an in-process system and report detection.
    AttackDemo {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        attack: u8,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

struct Out {
    mode: Output,
}

impl Out {
    /// Prints `text` or `record` depending on the mode.
    fn emit(&self, text: impl AsRef<str>, record: serde_json::Value) {
        let mut stdout = std::io::stdout().lock();
        let _ = match self.mode {
            Output::Text => writeln!(stdout, "{}", text.as_ref()),
            Output::Records => writeln!(stdout, "{record}"),
        };
        let _ = stdout.flush();
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("khtree: {msg}");
    ExitCode::from(code)
}

fn client_code(e: &ClientError) -> u8 {
    if e.is_transport() {
        exit::TRANSPORT
    } else {
        exit::PROTOCOL
    }
}

fn writer_code(e: &WriterError) -> u8 {
    match e {
        WriterError::Client(c) => client_code(c),
        e if e.is_misbehavior() => exit::MISBEHAVIOR,
        _ => exit::PROTOCOL,
    }
}

fn load_ring(dir: &Path) -> Result<KeyRing, ExitCode> {
    KeyRing::load_dir(dir).map_err(|e| fail(exit::CONFIG, format!("{}: {e}", dir.display())))
}

fn connect(cfg: HashConfig, addr: &str) -> Result<Client<khtree::client::TcpTransport>, ExitCode> {
    Client::connect(cfg, addr).map_err(|e| fail(exit::TRANSPORT, format!("{addr}: {e}")))
}

fn report(out: &Out, key: &str, v: &VerifiedReply) -> ExitCode {
    match v {
        VerifiedReply::VerifiedPresent { data, author_id } => {
            let data = String::from_utf8_lossy(data);
            let author = String::from_utf8_lossy(author_id);
            out.emit(
                format!("{data}\nVERIFIED present (author {author})"),
                json!({"command": "get", "key": key, "result": "present", "data": data, "author": author}),
            );
            ExitCode::from(exit::OK)
        }
        VerifiedReply::VerifiedAbsent => {
            out.emit(
                "VERIFIED absent",
                json!({"command": "get", "key": key, "result": "absent"}),
            );
            ExitCode::from(exit::OK)
        }
        VerifiedReply::AttackDetected(kind) => {
            out.emit(
                format!("{kind} detected"),
                json!({"command": "get", "key": key, "result": "attack", "kind": kind}),
            );
            ExitCode::from(exit::ATTACK)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    let cfg = cli.profile.cfg();
    let out = Out { mode: cli.output };
    match cli.command {
        Command::DbServe { data_dir } => {
            let (db, replay) = Database::open(cfg, &data_dir)
                .map_err(|e| fail(exit::CONFIG, format!("{}: {e}", data_dir.display())))?;
            let listener = TcpListener::bind(&cli.db_addr)
                .map_err(|e| fail(exit::TRANSPORT, format!("{}: {e}", cli.db_addr)))?;
            let addr = listener.local_addr().map_err(|e| fail(exit::TRANSPORT, e))?;
            out.emit(
                format!(
                    "listening {addr} root {} entries {} replayed {} dropped {}",
                    db.root(),
                    db.read().len(),
                    replay.records.len(),
                    replay.truncated_bytes
                ),
                json!({"event": "listening", "addr": addr.to_string(), "root": db.root().to_hex(),
                       "replayed": replay.records.len(), "dropped_bytes": replay.truncated_bytes}),
            );
            services::serve(listener, Arc::new(db));
            Ok(ExitCode::from(exit::OK))
        }
        Command::AnnounceServe => {
            let ring = load_ring(&cli.keys_dir)?;
            let listener = TcpListener::bind(&cli.announce_addr)
                .map_err(|e| fail(exit::TRANSPORT, format!("{}: {e}", cli.announce_addr)))?;
            let addr = listener.local_addr().map_err(|e| fail(exit::TRANSPORT, e))?;
            out.emit(
                format!("listening {addr} writers {}", ring.len()),
                json!({"event": "listening", "addr": addr.to_string(), "writers": ring.len()}),
            );
            services::serve(listener, Arc::new(AnnouncementService::new(ring)));
            Ok(ExitCode::from(exit::OK))
        }
        Command::Keygen { id } => {
            let w = WriterKeypair::generate(id.as_bytes().to_vec(), &mut rand::rngs::OsRng)
                .map_err(|e| fail(exit::CONFIG, e))?;
            w.save(&cli.keys_dir)
                .map_err(|e| fail(exit::CONFIG, format!("{}: {e}", cli.keys_dir.display())))?;
            let pk = hex::encode(w.public_key().as_bytes());
            out.emit(
                format!("wrote {id}.sec and {id}.pub to {} (public key {pk})", cli.keys_dir.display()),
                json!({"command": "keygen", "id": id, "public_key": pk}),
            );
            Ok(ExitCode::from(exit::OK))
        }
        Command::Put { writer, key, data } => {
            let session = writer_session(&cli.keys_dir, &writer, cfg, &cli.db_addr, &cli.announce_addr)?;
            let cred = session
                .writer_put(key.as_bytes(), data.as_bytes())
                .map_err(|e| fail(writer_code(&e), e))?;
            out.emit(
                format!("published seq {} root {}", cred.seq, cred.root),
                json!({"command": "put", "key": key, "seq": cred.seq, "root": cred.root.to_hex()}),
            );
            Ok(ExitCode::from(exit::OK))
        }
        Command::Delete { writer, key } => {
            let session = writer_session(&cli.keys_dir, &writer, cfg, &cli.db_addr, &cli.announce_addr)?;
            let cred = session
                .writer_delete(key.as_bytes())
                .map_err(|e| fail(writer_code(&e), e))?;
            out.emit(
                format!("published seq {} root {}", cred.seq, cred.root),
                json!({"command": "delete", "key": key, "seq": cred.seq, "root": cred.root.to_hex()}),
            );
            Ok(ExitCode::from(exit::OK))
        }
        Command::Get { key } => {
            let ring = load_ring(&cli.keys_dir)?;
            let reader = ReaderSession::new(
                cfg,
                ring,
                connect(cfg, &cli.db_addr)?,
                connect(cfg, &cli.announce_addr)?,
            );
            let v = reader
                .reader_get(key.as_bytes())
                .map_err(|e| fail(client_code(&e), e))?;
            Ok(report(&out, &key, &v))
        }
        Command::Attest { key, members } => {
            let set = KeySet::from_keys(cfg, members.iter().map(|m| m.as_bytes()))
                .map_err(|e| fail(exit::CONFIG, e))?;
            let d = attester_d(&set);
            let p = attester_p(&set, key.as_bytes());
            let verdict = attester_v(key.as_bytes(), &d, &p, &cfg);
            out.emit(
                format!("{verdict:?} (digest {d})"),
                json!({"command": "attest", "key": key, "digest": d.to_hex(), "verdict": format!("{verdict:?}")}),
            );
            Ok(ExitCode::from(exit::OK))
        }
        Command::Bench { sizes, seed } => {
            for n in sizes {
                for r in bench_suite(&cfg, cli.profile.name(), n, seed) {
                    let rec = serde_json::to_value(&r).expect("plain record");
                    out.emit(format!("{} n={} {} = {}", r.profile, r.n, r.metric, r.value), rec);
                }
            }
            Ok(ExitCode::from(exit::OK))
        }
        Command::AttackDemo { attack, seed } => {
            let attack = Attack::from_number(attack).expect("range-checked");
            let kind = attack_demo(cfg, attack, seed).map_err(|e| fail(writer_code(&e), e))?;
            Ok(report(&out, "demo", &VerifiedReply::AttackDetected(kind)))
        }
    }
}

fn writer_session(
    keys_dir: &Path,
    id: &str,
    cfg: HashConfig,
    db_addr: &str,
    announce_addr: &str,
) -> Result<WriterSession<Client<khtree::client::TcpTransport>, Client<khtree::client::TcpTransport>>, ExitCode> {
    let w = WriterKeypair::load(keys_dir, id)
        .map_err(|e| fail(exit::CONFIG, format!("{}/{id}.sec: {e}", keys_dir.display())))?;
    let ring = load_ring(keys_dir)?;
    Ok(WriterSession::new(
        cfg,
        w,
        ring,
        connect(cfg, db_addr)?,
        connect(cfg, announce_addr)?,
    ))
}

/// Populates an in-process system, turns the database malicious and lets a
/// reader query a key chosen for the attack.
fn attack_demo(cfg: HashConfig, attack: Attack, seed: u64) -> Result<AttackKind, WriterError> {
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let w = WriterKeypair::generate("alice", &mut rng).expect("short id");
    let mut ring = KeyRing::new();
    ring.add_writer(&w);
    let db = Arc::new(Database::in_memory(cfg));
    let announce = Arc::new(AnnouncementService::new(ring.clone()));
    let evil = Arc::new(MaliciousDb::new(Arc::clone(&db), attack, seed));
    let writer = WriterSession::new(
        cfg,
        w,
        ring.clone(),
        Client::new(cfg, Arc::clone(&db)),
        Client::new(cfg, Arc::clone(&announce)),
    );
    for i in 0..4 {
        writer.writer_put(format!("entry-{i}").as_bytes(), format!("value {i}").as_bytes())?;
    }
    evil.take_snapshot();
    writer.writer_put(b"entry-0", b"value 0, updated")?;
    let target: &[u8] = match attack {
        Attack::Forge => b"never-written",
        _ => b"entry-0",
    };
    let reader = ReaderSession::new(cfg, ring, Client::new(cfg, evil), Client::new(cfg, announce));
    match reader.reader_get(target)? {
        VerifiedReply::AttackDetected(kind) => Ok(kind),
        other => panic!("attack went unnoticed: {other:?}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    run(cli).unwrap_or_else(|code| code)
}
