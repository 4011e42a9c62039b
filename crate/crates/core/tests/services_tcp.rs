mod common;

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::thread;

use khtree::client::{Client, ReaderSession, VerifiedReply, WriterSession};
use khtree::credentials::sign_credential;
use khtree::services::wire::{read_frame, write_frame};
use khtree::services::{spawn, AnnouncementService, Database, Request, Response, Status};
use khtree::HashConfig;

struct Net {
    cfg: HashConfig,
    db: Arc<Database>,
    announce: Arc<AnnouncementService>,
    db_addr: SocketAddr,
    ann_addr: SocketAddr,
}

fn start(cfg: HashConfig, keys: khtree::credentials::KeyRing) -> Net {
    let db = Arc::new(Database::in_memory(cfg));
    let announce = Arc::new(AnnouncementService::new(keys));
    let db_addr = spawn("127.0.0.1:0", Arc::clone(&db)).unwrap();
    let ann_addr = spawn("127.0.0.1:0", Arc::clone(&announce)).unwrap();
    Net {
        cfg,
        db,
        announce,
        db_addr,
        ann_addr,
    }
}

fn raw_call(addr: SocketAddr, body: &[u8]) -> Vec<u8> {
    let mut s = TcpStream::connect(addr).unwrap();
    write_frame(&mut s, body).unwrap();
    read_frame(&mut s).unwrap().unwrap()
}

#[test]
fn end_to_end_over_tcp() {
    let cfg = HashConfig::default_profile();
    let alice = common::writer("alice", 1);
    let keys = common::ring(&[&alice]);
    let net = start(cfg, keys.clone());
    let writer = WriterSession::new(
        cfg,
        alice,
        keys.clone(),
        Client::connect(cfg, net.db_addr).unwrap(),
        Client::connect(cfg, net.ann_addr).unwrap(),
    );
    let reader = ReaderSession::new(
        cfg,
        keys,
        Client::connect(cfg, net.db_addr).unwrap(),
        Client::connect(cfg, net.ann_addr).unwrap(),
    );
    assert_eq!(reader.reader_get(b"k").unwrap(), VerifiedReply::VerifiedAbsent);
    for i in 0u8..10 {
        writer.writer_put(&[b'k', i], &[i; 3]).unwrap();
    }
    writer.writer_delete(&[b'k', 4]).unwrap();
    let cred = net.announce.fetch().unwrap();
    assert_eq!(cred.seq, 11);
    assert_eq!(cred.root, net.db.root());
    assert!(matches!(
        reader.reader_get(&[b'k', 7]).unwrap(),
        VerifiedReply::VerifiedPresent { ref data, .. } if data == &[7; 3]
    ));
    assert_eq!(reader.reader_get(&[b'k', 4]).unwrap(), VerifiedReply::VerifiedAbsent);
}

#[test]
fn malformed_unknown_and_misrouted_requests() {
    let cfg = HashConfig::toy();
    let net = start(cfg, common::ring(&[]));
    let status = |addr, body: &[u8]| raw_call(addr, body);
    assert_eq!(status(net.db_addr, &[0x01, 0, 0]), vec![Status::ProtoMalformed as u8]);
    assert_eq!(status(net.db_addr, &[0x99]), vec![Status::UnknownOpcode as u8]);
    assert_eq!(status(net.db_addr, &[]), vec![Status::ProtoMalformed as u8]);
    assert_eq!(status(net.ann_addr, &Request::Root.encode()), vec![Status::UnknownOpcode as u8]);
    assert_eq!(status(net.db_addr, &Request::Fetch.encode()), vec![Status::UnknownOpcode as u8]);
    assert_eq!(status(net.ann_addr, &Request::Fetch.encode()), vec![Status::Empty as u8]);
    // a PUT whose value is not a signed entry
    let put = Request::Put {
        key: b"k".to_vec(),
        value: b"raw".to_vec(),
    };
    assert_eq!(status(net.db_addr, &put.encode()), vec![Status::ProtoMalformed as u8]);
    let del = Request::Delete { key: b"k".to_vec() };
    assert_eq!(status(net.db_addr, &del.encode()), vec![Status::NotFound as u8]);
}

#[test]
fn oversize_frame_is_refused_and_connection_closed() {
    let cfg = HashConfig::toy();
    let net = start(cfg, common::ring(&[]));
    let mut s = TcpStream::connect(net.db_addr).unwrap();
    s.write_all(&(32u32 << 20).to_be_bytes()).unwrap();
    let body = read_frame(&mut s).unwrap().unwrap();
    assert_eq!(body, vec![Status::ProtoOversize as u8]);
    let mut rest = Vec::new();
    s.read_to_end(&mut rest).unwrap();
    assert!(rest.is_empty());
    // the server keeps serving other connections
    let root = raw_call(net.db_addr, &Request::Root.encode());
    assert!(matches!(
        Response::decode(&cfg, khtree::services::Opcode::Root, &root).unwrap(),
        Response::Root(_)
    ));
}

#[test]
fn announcement_rejections() {
    let cfg = HashConfig::toy();
    let alice = common::writer("alice", 2);
    let mallory = common::writer("mallory", 3);
    let net = start(cfg, common::ring(&[&alice]));
    let publish = |c| raw_call(net.ann_addr, &Request::Publish(c).encode());
    let root = cfg.digest(b"r");
    assert_eq!(publish(sign_credential(&cfg, root, 1, &mallory)), vec![Status::RejectSig as u8]);
    let mut tampered = sign_credential(&cfg, root, 1, &alice);
    tampered.seq = 2;
    assert_eq!(publish(tampered), vec![Status::RejectSig as u8]);
    assert_eq!(publish(sign_credential(&cfg, root, 5, &alice)), vec![Status::Ok as u8]);
    assert_eq!(publish(sign_credential(&cfg, root, 5, &alice)), vec![Status::RejectStale as u8]);
    assert_eq!(publish(sign_credential(&cfg, root, 4, &alice)), vec![Status::RejectStale as u8]);
    assert_eq!(net.announce.fetch().unwrap().seq, 5);
}

#[test]
fn two_writers_on_disjoint_keys_stay_consistent() {
    let cfg = HashConfig::default_profile();
    let alice = common::writer("alice", 4);
    let bob = common::writer("bob", 5);
    let keys = common::ring(&[&alice, &bob]);
    let net = Arc::new(start(cfg, keys.clone()));
    let per = 25u8;
    let handles: Vec<_> = [alice, bob]
        .into_iter()
        .enumerate()
        .map(|(tag, w)| {
            let keys = keys.clone();
            let (db_addr, ann_addr) = (net.db_addr, net.ann_addr);
            thread::spawn(move || {
                let mut s = WriterSession::new(
                    cfg,
                    w,
                    keys,
                    Client::connect(cfg, db_addr).unwrap(),
                    Client::connect(cfg, ann_addr).unwrap(),
                );
                s.retries = 200;
                for i in 0..per {
                    s.writer_put(&[tag as u8, i], &[i]).unwrap();
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let cred = net.announce.fetch().unwrap();
    assert_eq!(cred.seq, 2 * per as u64);
    assert_eq!(cred.root, net.db.root());
    assert_eq!(net.db.read().keys().count(), 2 * per as usize);
    net.db.audit().unwrap();
    let reader = ReaderSession::new(
        net.cfg,
        keys,
        Client::connect(cfg, net.db_addr).unwrap(),
        Client::connect(cfg, net.ann_addr).unwrap(),
    );
    for tag in 0..2u8 {
        for i in 0..per {
            assert!(matches!(
                reader.reader_get(&[tag, i]).unwrap(),
                VerifiedReply::VerifiedPresent { .. }
            ));
        }
    }
}
