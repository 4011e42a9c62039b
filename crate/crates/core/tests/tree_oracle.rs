mod common;

use std::collections::BTreeMap;

use khtree::oracle::{dense_proof, dense_root, DenseTree};
use khtree::proof::{updated_root, verify_reply, Reply, VerifyOutcome};
use khtree::{EmptyTable, HashConfig, SparseTree};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Put(usize, Vec<u8>),
    Delete(usize),
}

fn op_strategy(pool: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..pool, proptest::collection::vec(any::<u8>(), 1..8)).prop_map(|(i, v)| Op::Put(i, v)),
        2 => (0..pool).prop_map(Op::Delete),
    ]
}

fn pool(cfg: &HashConfig, seed: u64) -> Vec<Vec<u8>> {
    common::distinct_keys(cfg, 48, &mut common::rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_tree_tracks_dense_oracle(
        seed in any::<u64>(),
        height in 1usize..=8,
        ops in proptest::collection::vec(op_strategy(48), 1..120),
    ) {
        let cfg = HashConfig::toy().with_path_height(height).unwrap();
        let keys = pool(&HashConfig::toy(), seed);
        let mut tree = SparseTree::new(cfg);
        let mut model: BTreeMap<Vec<u8>, Vec<u8>> = BTreeMap::new();
        for op in ops {
            match op {
                Op::Put(i, v) => {
                    let k = &keys[i];
                    // at small heights pool keys can share a leaf; keep the model keyed by path
                    model.retain(|m, _| m == k || !cfg.key_path(m).same_leaf(&cfg.key_path(k)));
                    tree.insert(k, cfg.digest(&v)).unwrap();
                    model.insert(k.clone(), v);
                }
                Op::Delete(i) => {
                    let k = &keys[i];
                    let had = model.remove(k).is_some();
                    let res = tree.delete(k);
                    if had {
                        prop_assert!(res.is_ok());
                    } else if model.keys().all(|m| !cfg.key_path(m).same_leaf(&cfg.key_path(k))) {
                        prop_assert!(res.is_err());
                    } else {
                        // the leaf belonged to another key sharing the path
                        model.retain(|m, _| !cfg.key_path(m).same_leaf(&cfg.key_path(k)));
                    }
                }
            }
            let entries = common::entries_of(&cfg, &model);
            prop_assert_eq!(tree.root_digest(), dense_root(&cfg, &entries).unwrap());
            prop_assert_eq!(tree.len(), model.len());
            prop_assert!(tree.node_count() <= (2 * model.len()).saturating_sub(1));
            tree.audit().map_err(TestCaseError::fail)?;
        }
    }

    #[test]
    fn rootpath_equals_dense_proof(seed in any::<u64>(), n in 0usize..40) {
        let cfg = HashConfig::toy();
        let keys = pool(&cfg, seed);
        let mut tree = SparseTree::new(cfg);
        let mut entries = BTreeMap::new();
        for (i, k) in keys.iter().take(n).enumerate() {
            let d = cfg.digest(&[i as u8]);
            tree.insert(k, d).unwrap();
            entries.insert(k.clone(), d);
        }
        let dense = DenseTree::build(&cfg, &entries).unwrap();
        for k in &keys {
            prop_assert_eq!(tree.rootpath(k), dense.proof(k));
        }
        for probe in 0u16..64 {
            let k = probe.to_be_bytes();
            prop_assert_eq!(tree.rootpath(&k), dense_proof(&cfg, &entries, &k).unwrap());
        }
    }

    #[test]
    fn root_is_independent_of_insertion_order(
        seed in any::<u64>(),
        n in 1usize..40,
        shuffle_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let cfg = HashConfig::default_profile();
        let keys = pool(&cfg, seed);
        let mut a = SparseTree::new(cfg);
        for k in keys.iter().take(n) {
            a.insert(k, cfg.digest(k)).unwrap();
        }
        let mut shuffled: Vec<_> = keys.iter().take(n).collect();
        shuffled.shuffle(&mut common::rng(shuffle_seed));
        let mut b = SparseTree::new(cfg);
        for k in shuffled {
            b.insert(k, cfg.digest(k)).unwrap();
        }
        prop_assert_eq!(a.root_digest(), b.root_digest());
        prop_assert_eq!(a.node_count(), b.node_count());
    }

    #[test]
    fn writer_recomputation_matches_tree(
        seed in any::<u64>(),
        ops in proptest::collection::vec(op_strategy(48), 1..80),
    ) {
        let cfg = HashConfig::toy();
        let keys = pool(&cfg, seed);
        let mut tree = SparseTree::new(cfg);
        let e0 = tree.empties().get(0);
        for op in ops {
            let (k, leaf) = match &op {
                Op::Put(i, v) => (&keys[*i], cfg.digest(v)),
                Op::Delete(i) => (&keys[*i], e0),
            };
            let proof = tree.rootpath(k);
            let predicted = updated_root(&cfg, k, &proof, leaf).unwrap();
            match op {
                Op::Put(..) => { tree.insert(k, leaf).unwrap(); }
                Op::Delete(_) => { let _ = tree.delete(k); }
            }
            prop_assert_eq!(predicted, tree.root_digest());
        }
    }

    #[test]
    fn insert_then_delete_restores_root(seed in any::<u64>(), n in 0usize..40, extra in 40usize..48) {
        let cfg = HashConfig::toy();
        let keys = pool(&cfg, seed);
        let mut tree = SparseTree::new(cfg);
        for k in keys.iter().take(n) {
            tree.insert(k, cfg.digest(k)).unwrap();
        }
        let before = tree.root_digest();
        let nodes = tree.node_count();
        tree.insert(&keys[extra], cfg.digest(b"x")).unwrap();
        tree.delete(&keys[extra]).unwrap();
        prop_assert_eq!(tree.root_digest(), before);
        prop_assert_eq!(tree.node_count(), nodes);
    }

    #[test]
    fn honest_replies_verify(seed in any::<u64>(), n in 0usize..40) {
        let cfg = HashConfig::toy();
        let e = EmptyTable::build(&cfg);
        let keys = pool(&cfg, seed);
        let mut tree = SparseTree::new(cfg);
        for k in keys.iter().take(n) {
            tree.insert(k, cfg.digest(&[k.as_slice(), b"!"].concat())).unwrap();
        }
        let root = tree.root_digest();
        for (i, k) in keys.iter().enumerate() {
            let reply = if i < n { Reply::Present([k.as_slice(), b"!"].concat()) } else { Reply::Absent };
            prop_assert_eq!(
                verify_reply(&cfg, &e, &root, k, &reply, &tree.rootpath(k)),
                VerifyOutcome::Valid
            );
        }
    }
}

#[test]
fn node_count_is_exactly_two_n_minus_one() {
    let cfg = HashConfig::default_profile();
    let keys = pool(&cfg, 11);
    let mut tree = SparseTree::new(cfg);
    assert_eq!(tree.node_count(), 0);
    for (i, k) in keys.iter().enumerate() {
        tree.insert(k, cfg.digest(k)).unwrap();
        assert_eq!(tree.node_count(), 2 * (i + 1) - 1);
    }
}
