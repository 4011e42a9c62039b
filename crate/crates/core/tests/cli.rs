mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::ServerProc;

fn khtree(keys: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_khtree"))
        .arg("--keys-dir")
        .arg(keys)
        .args(extra)
        .output()
        .expect("run khtree")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn keygen_serve_put_get_delete() {
    let tmp = tempfile::tempdir().unwrap();
    let keys = tmp.path().join("keys");
    let data = tmp.path().join("data");
    assert!(khtree(&keys, &["keygen", "alice"]).status.success());
    assert!(keys.join("alice.pub").exists() && keys.join("alice.sec").exists());

    let db = ServerProc::start(&[
        "--db-addr",
        "127.0.0.1:0",
        "db-serve",
        "--data-dir",
        data.to_str().unwrap(),
    ]);
    let ann = ServerProc::start(&[
        "--keys-dir",
        keys.to_str().unwrap(),
        "--announce-addr",
        "127.0.0.1:0",
        "announce-serve",
    ]);
    let addrs = ["--db-addr", &db.addr, "--announce-addr", &ann.addr];
    let run = |rest: &[&str]| khtree(&keys, &[&addrs[..], rest].concat());

    let put = run(&["put", "--writer", "alice", "greeting", "hello"]);
    assert!(put.status.success(), "{}", String::from_utf8_lossy(&put.stderr));
    assert!(stdout(&put).starts_with("published seq 1 "));

    let get = run(&["get", "greeting"]);
    assert_eq!(get.status.code(), Some(0));
    let text = stdout(&get);
    assert!(text.contains("hello") && text.contains("VERIFIED present"), "{text}");

    let absent = run(&["get", "nobody"]);
    assert_eq!(absent.status.code(), Some(0));
    assert!(stdout(&absent).contains("VERIFIED absent"));

    let del = run(&["--output", "records", "delete", "--writer", "alice", "greeting"]);
    assert!(del.status.success());
    let rec: serde_json::Value = serde_json::from_str(stdout(&del).trim()).unwrap();
    assert_eq!(rec["seq"], 2);

    let again = run(&["delete", "--writer", "alice", "greeting"]);
    assert!(!again.status.success());

    let unknown = run(&["put", "--writer", "bob", "k", "v"]);
    assert_eq!(unknown.status.code(), Some(7));
}

#[test]
fn unreachable_service_is_a_transport_error() {
    let tmp = tempfile::tempdir().unwrap();
    let keys = tmp.path().join("keys");
    khtree(&keys, &["keygen", "alice"]);
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dead = listener.local_addr().unwrap().to_string();
    drop(listener);
    let o = khtree(&keys, &["--db-addr", &dead, "--announce-addr", &dead, "get", "k"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn attack_demo_reports_detection() {
    let tmp = tempfile::tempdir().unwrap();
    let expected = ["ChangedEntry", "ForgedEntry", "Relabeled", "StaleEntry", "DeniedEntry"];
    for (i, kind) in expected.iter().enumerate() {
        let o = khtree(tmp.path(), &["attack-demo", &(i + 1).to_string()]);
        assert_eq!(o.status.code(), Some(5));
        assert!(stdout(&o).contains(&format!("{kind} detected")), "{}", stdout(&o));
    }
    let bad = khtree(tmp.path(), &["attack-demo", "9"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn attest_and_bench_records() {
    let tmp = tempfile::tempdir().unwrap();
    let yes = khtree(tmp.path(), &["attest", "a", "--member", "a", "--member", "b"]);
    assert!(stdout(&yes).starts_with("Accept"));
    let no = khtree(tmp.path(), &["attest", "c", "--member", "a", "--member", "b"]);
    assert!(stdout(&no).starts_with("Reject"));

    let o = khtree(
        tmp.path(),
        &["--profile", "toy", "--output", "records", "bench", "--n", "64", "--seed", "3"],
    );
    assert!(o.status.success());
    let recs: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let get = |m: &str| recs.iter().find(|r| r["metric"] == m).unwrap()["value"].as_f64().unwrap();
    assert_eq!(get("node_count"), 127.0);
    assert_eq!(get("proof_bytes"), 512.0);
    assert!(recs.iter().all(|r| r["profile"] == "toy" && r["n"] == 64 && r["seed"] == 3));
}
