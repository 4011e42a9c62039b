mod common;

use khtree::credentials::{sign_credential, sign_entry_value, SignedEntryValue, StateCredential};
use khtree::proof::{HashPair, PathProof, Reply};
use khtree::services::wal::{WalOp, WalRecord};
use khtree::services::wire::{read_frame, write_frame, Opcode, Request, Response, Status};
use khtree::{Digest, HashConfig};
use proptest::prelude::*;

fn digest_strategy(cfg: HashConfig) -> impl Strategy<Value = Digest> {
    proptest::collection::vec(any::<u8>(), cfg.digest_len())
        .prop_map(|b| Digest::from_slice(&b).unwrap())
}

fn proof_strategy(cfg: HashConfig) -> impl Strategy<Value = PathProof> {
    proptest::collection::vec(
        (digest_strategy(cfg), digest_strategy(cfg)).prop_map(|(l, r)| HashPair::new(l, r)),
        cfg.path_height(),
    )
    .prop_map(PathProof::new)
}

fn bytes(max: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(any::<u8>(), 0..max)
}

fn credential(cfg: HashConfig) -> impl Strategy<Value = StateCredential> {
    (digest_strategy(cfg), any::<u64>(), any::<u64>()).prop_map(move |(root, seq, seed)| {
        sign_credential(&cfg, root, seq, &common::writer("w", seed))
    })
}

fn request(cfg: HashConfig) -> impl Strategy<Value = Request> {
    prop_oneof![
        bytes(64).prop_map(|key| Request::Get { key }),
        (bytes(64), bytes(256)).prop_map(|(key, value)| Request::Put { key, value }),
        bytes(64).prop_map(|key| Request::Delete { key }),
        bytes(64).prop_map(|key| Request::Rootpath { key }),
        Just(Request::Root),
        credential(cfg).prop_map(Request::Publish),
        Just(Request::Fetch),
    ]
}

fn status() -> impl Strategy<Value = Status> {
    prop::sample::select(vec![
        Status::RejectSig,
        Status::RejectStale,
        Status::Empty,
        Status::NotFound,
        Status::PathCollision,
        Status::ProtoMalformed,
        Status::ProtoOversize,
        Status::UnknownOpcode,
    ])
}

fn response(cfg: HashConfig) -> impl Strategy<Value = (Opcode, Response)> {
    let reply = prop_oneof![bytes(128).prop_map(Reply::Present), Just(Reply::Absent)];
    prop_oneof![
        (reply, proof_strategy(cfg))
            .prop_map(|(reply, proof)| (Opcode::Get, Response::Entry { reply, proof })),
        (
            prop::sample::select(vec![Opcode::Put, Opcode::Delete, Opcode::Root]),
            digest_strategy(cfg)
        )
            .prop_map(|(op, d)| (op, Response::Root(d))),
        proof_strategy(cfg).prop_map(|p| (Opcode::Rootpath, Response::Path(p))),
        Just((Opcode::Publish, Response::Published)),
        credential(cfg).prop_map(|c| (Opcode::Fetch, Response::Credential(c))),
        (
            prop::sample::select(vec![Opcode::Get, Opcode::Put, Opcode::Publish, Opcode::Fetch]),
            status()
        )
            .prop_map(|(op, s)| (op, Response::Status(s))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn requests_round_trip(req in request(HashConfig::toy())) {
        prop_assert_eq!(Request::decode(&req.encode()).unwrap(), req);
    }

    #[test]
    fn responses_round_trip((op, resp) in response(HashConfig::toy())) {
        let cfg = HashConfig::toy();
        prop_assert_eq!(Response::decode(&cfg, op, &resp.encode()).unwrap(), resp);
    }

    #[test]
    fn frames_round_trip(body in bytes(1024)) {
        let mut buf = Vec::new();
        write_frame(&mut buf, &body).unwrap();
        prop_assert_eq!(buf.len(), body.len() + 4);
        prop_assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), Some(body));
    }

    #[test]
    fn arbitrary_bytes_never_panic_decoders(body in bytes(600), op in 0usize..7) {
        let cfg = HashConfig::toy();
        let ops = [Opcode::Get, Opcode::Put, Opcode::Delete, Opcode::Rootpath, Opcode::Root, Opcode::Publish, Opcode::Fetch];
        let _ = Request::decode(&body);
        let _ = Response::decode(&cfg, ops[op], &body);
        let _ = StateCredential::decode(&body);
        let _ = SignedEntryValue::decode(&body);
        let _ = WalRecord::decode_prefix(&body);
        let _ = PathProof::decode(&cfg, &body);
    }

    #[test]
    fn truncated_requests_are_rejected(req in request(HashConfig::toy()), cut in any::<prop::sample::Index>()) {
        let enc = req.encode();
        let cut = cut.index(enc.len());
        if let Ok(decoded) = Request::decode(&enc[..cut]) {
            // only bodiless requests survive truncation, and only untouched
            prop_assert_eq!(cut, enc.len());
            prop_assert_eq!(decoded, req);
        }
    }

    #[test]
    fn proofs_round_trip(p in proof_strategy(HashConfig::default_profile())) {
        let cfg = HashConfig::default_profile();
        let enc = p.encode();
        prop_assert_eq!(enc.len(), 16384);
        prop_assert_eq!(PathProof::decode(&cfg, &enc).unwrap(), p);
    }

    #[test]
    fn credentials_round_trip(c in credential(HashConfig::default_profile())) {
        prop_assert_eq!(StateCredential::decode(&c.encode()).unwrap(), c);
    }

    #[test]
    fn entry_values_round_trip(key in bytes(64), data in bytes(256), seed in any::<u64>()) {
        let sev = sign_entry_value(&key, &data, &common::writer("author", seed));
        prop_assert_eq!(SignedEntryValue::decode(&sev.encode()).unwrap(), sev);
    }

    #[test]
    fn wal_records_round_trip(seq in any::<u64>(), key in bytes(64), value in proptest::option::of(bytes(256))) {
        let op = match value {
            Some(value) => WalOp::Put { key, value },
            None => WalOp::Delete { key },
        };
        let rec = WalRecord { seq, op };
        let enc = rec.encode();
        prop_assert_eq!(WalRecord::decode_prefix(&enc), Some((rec, enc.len())));
    }
}
