//! Sparse in-memory representation of a keyed hash tree.
//!
//! The logical tree has height `H` and one leaf per possible key path; a leaf
//! holds the digest of the value stored under a key, or `E[0]` when empty.
//! Only nodes on paths to non-empty leaves are stored:
//!
//! * a `Leaf` node stands for a sub-tree with exactly one non-empty leaf and
//!   keeps the remaining path bits down to that leaf;
//! * a `Branch` node stands for a sub-tree with two or more non-empty
//!   leaves. Runs of levels where only one side is occupied (stalks) are not
//!   stored as separate nodes: the branch records the stalk bits above its
//!   split point and always has both children.
//!
//! With stalks folded into their branch the tree holds exactly `2n - 1` nodes
//! for `n` entries. Root hashes and proofs are those of the logical tree and
//! do not depend on the stored shape.
//!
//! Node hashes below a node are generated on demand by folding the stored
//! path bits against the table of empty sub-tree roots.
//!
//! Recursion depth in `insert`/`delete` is bounded by the number of stored
//! nodes on one path, which is at most `H + 1`.

use thiserror::Error;

use crate::hash::{hash_ordered, Digest, EmptyTable, HashConfig, PathBits};
use crate::proof::{HashPair, PathProof};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("the empty-leaf digest cannot be stored; delete the key instead")]
    EmptyLeafValue,
    #[error("no such entry")]
    NotFound,
}

/// The single entry below a leaf node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafEntry {
    /// Path bits from the node's depth down to the actual leaf.
    pub path: PathBits,
    pub value: Digest,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        entry: LeafEntry,
        hash: Digest,
    },
    Branch {
        /// Bits from this node's depth to the split point; may be empty.
        stalk: PathBits,
        /// Both present in every complete state.
        children: [Option<Box<Node>>; 2],
        hash: Digest,
    },
}

impl Node {
    fn hash(&self) -> Digest {
        match self {
            Node::Leaf { hash, .. } | Node::Branch { hash, .. } => *hash,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Branch,
    Leaf,
}

/// Read-only description of one stored node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeView {
    pub kind: NodeKind,
    /// Depth of the node in the logical tree.
    pub depth: usize,
    /// Depth at which a branch splits; equal to `depth` without a stalk.
    /// For leaves, the depth of the actual leaf (`H`).
    pub end_depth: usize,
    pub hash: Digest,
}

/// Folds `bottom` upward over `bits`, pairing with the matching empty root
/// at each level. `bottom_height` is the height of the node below the last
/// bit.
fn fold_up(
    cfg: &HashConfig,
    empties: &EmptyTable,
    bits: &PathBits,
    bottom_height: usize,
    bottom: Digest,
) -> Digest {
    let len = bits.len();
    bits.iter()
        .rev()
        .enumerate()
        .fold(bottom, |cur, (up, bit)| {
            debug_assert!(up < len);
            hash_ordered(cfg, bit, &cur, &empties.get(bottom_height + up))
        })
}

/// Root of a sub-tree holding one leaf `value` at the end of
/// `remaining_path`. An empty path yields `value` itself.
pub fn subtree_hash_single(
    cfg: &HashConfig,
    empties: &EmptyTable,
    remaining_path: &PathBits,
    value: Digest,
) -> Digest {
    fold_up(cfg, empties, remaining_path, 0, value)
}

#[derive(Debug, Clone)]
struct Ctx {
    cfg: HashConfig,
    empties: EmptyTable,
}

impl Ctx {
    fn height(&self) -> usize {
        self.cfg.path_height()
    }

    fn leaf(&self, entry: LeafEntry) -> Box<Node> {
        let hash = subtree_hash_single(&self.cfg, &self.empties, &entry.path, entry.value);
        Box::new(Node::Leaf { entry, hash })
    }

    fn branch(&self, stalk: PathBits, left: Box<Node>, right: Box<Node>) -> Box<Node> {
        let hash = self.branch_hash(&stalk, &left.hash(), &right.hash());
        Box::new(Node::Branch {
            stalk,
            children: [Some(left), Some(right)],
            hash,
        })
    }

    fn branch_hash(&self, stalk: &PathBits, left: &Digest, right: &Digest) -> Digest {
        let split = self.cfg.digest_pair(left, right);
        fold_up(
            &self.cfg,
            &self.empties,
            stalk,
            self.height() - stalk.end(),
            split,
        )
    }

    fn rehash(&self, node: &mut Node) {
        match node {
            Node::Leaf { entry, hash } => {
                *hash = subtree_hash_single(&self.cfg, &self.empties, &entry.path, entry.value)
            }
            Node::Branch {
                stalk,
                children,
                hash,
            } => {
                let l = children[0].as_ref().expect("branch has two children").hash();
                let r = children[1].as_ref().expect("branch has two children").hash();
                *hash = self.branch_hash(stalk, &l, &r);
            }
        }
    }

    /// Hashes of the sub-trees along `bits` starting from `bottom` at the
    /// split/leaf end: element `k` is the node at depth `bits.start() + k`,
    /// the last element is `bottom` itself.
    fn chain(&self, bits: &PathBits, bottom_height: usize, bottom: Digest) -> Vec<Digest> {
        let len = bits.len();
        let mut out = vec![bottom; len + 1];
        for k in (0..len).rev() {
            let sibling = self.empties.get(bottom_height + (len - 1 - k));
            out[k] = hash_ordered(&self.cfg, bits.get(k), &out[k + 1], &sibling);
        }
        out
    }

    /// Pushes the pairs for levels `bits.start()..bits.end()` along a run of
    /// single-occupancy levels. Returns the absolute position where the query
    /// left the run, if it did.
    fn push_run(
        &self,
        pairs: &mut Vec<HashPair>,
        bits: &PathBits,
        bottom_height: usize,
        bottom: Digest,
        query: &PathBits,
    ) -> Option<usize> {
        let h = self.height();
        let chain = self.chain(bits, bottom_height, bottom);
        for (k, pos) in (bits.start()..bits.end()).enumerate() {
            let bit = bits.get(k);
            pairs.push(HashPair::ordered(
                bit,
                chain[k + 1],
                self.empties.get(h - pos - 1),
            ));
            if query.at(pos) != bit {
                return Some(pos);
            }
        }
        None
    }

    fn push_empty(&self, pairs: &mut Vec<HashPair>, from_depth: usize) {
        let h = self.height();
        pairs.extend((from_depth..h).map(|d| {
            let e = self.empties.get(h - d - 1);
            HashPair::new(e, e)
        }));
    }
}

fn insert_node(
    ctx: &Ctx,
    node: Option<Box<Node>>,
    depth: usize,
    path: &PathBits,
    value: Digest,
) -> (Box<Node>, bool) {
    let Some(mut node) = node else {
        // virgin sub-tree
        let entry = LeafEntry {
            path: path.from_position(depth),
            value,
        };
        return (ctx.leaf(entry), true);
    };
    match &mut *node {
        Node::Leaf { entry, .. } if entry.path.same_leaf(path) => {
            entry.value = value;
            ctx.rehash(&mut node);
            (node, false)
        }
        Node::Leaf { entry, .. } => {
            // Push the resident entry down its own path until the two paths
            // part; the levels in between become the new branch's stalk.
            let split = entry
                .path
                .first_difference(path, depth)
                .expect("distinct leaves differ below the node");
            let old = ctx.leaf(LeafEntry {
                path: entry.path.from_position(split + 1),
                value: entry.value,
            });
            let new = ctx.leaf(LeafEntry {
                path: path.from_position(split + 1),
                value,
            });
            let stalk = path.window(depth, split);
            let branch = if path.at(split) {
                ctx.branch(stalk, old, new)
            } else {
                ctx.branch(stalk, new, old)
            };
            (branch, true)
        }
        Node::Branch { stalk, children, .. } => {
            if let Some(split) = stalk.first_difference(path, depth) {
                // The new path leaves the stalk: cut it at `split`.
                let lower_stalk = stalk.window(split + 1, stalk.end());
                let upper_stalk = path.window(depth, split);
                *stalk = lower_stalk;
                ctx.rehash(&mut node);
                let new = ctx.leaf(LeafEntry {
                    path: path.from_position(split + 1),
                    value,
                });
                let branch = if path.at(split) {
                    ctx.branch(upper_stalk, node, new)
                } else {
                    ctx.branch(upper_stalk, new, node)
                };
                return (branch, true);
            }
            let split = stalk.end();
            let bit = path.at(split) as usize;
            let (child, added) = insert_node(ctx, children[bit].take(), split + 1, path, value);
            children[bit] = Some(child);
            ctx.rehash(&mut node);
            (node, added)
        }
    }
}

/// Removes the leaf on `path`, which must be present.
fn delete_node(ctx: &Ctx, node: Node, path: &PathBits) -> Option<Box<Node>> {
    match node {
        Node::Leaf { .. } => None,
        Node::Branch {
            stalk,
            mut children,
            hash,
        } => {
            let bit = path.at(stalk.end()) as usize;
            let child = children[bit].take().expect("branch has two children");
            children[bit] = delete_node(ctx, *child, path);
            if children[bit].is_some() {
                let mut node = Box::new(Node::Branch {
                    stalk,
                    children,
                    hash,
                });
                ctx.rehash(&mut node);
                return Some(node);
            }
            // One child left: it absorbs this node and its stalk.
            let survivor = children[1 - bit].take().expect("branch has two children");
            let top = stalk.start();
            Some(match *survivor {
                Node::Leaf { entry, .. } => ctx.leaf(LeafEntry {
                    path: entry.path.from_position(top),
                    value: entry.value,
                }),
                Node::Branch {
                    stalk: lower,
                    children,
                    hash,
                } => {
                    let mut merged = Box::new(Node::Branch {
                        stalk: lower.window(top, lower.end()),
                        children,
                        hash,
                    });
                    ctx.rehash(&mut merged);
                    merged
                }
            })
        }
    }
}

/// Sparse keyed hash tree mapping key paths to value digests.
///
/// Mutations need `&mut self`; reads can run concurrently through shared
/// references.
#[derive(Debug, Clone)]
pub struct SparseTree {
    ctx: Ctx,
    root: Option<Box<Node>>,
    len: usize,
}

impl SparseTree {
    pub fn new(cfg: HashConfig) -> Self {
        let empties = EmptyTable::build(&cfg);
        SparseTree {
            ctx: Ctx { cfg, empties },
            root: None,
            len: 0,
        }
    }

    pub fn cfg(&self) -> &HashConfig {
        &self.ctx.cfg
    }

    pub fn empties(&self) -> &EmptyTable {
        &self.ctx.empties
    }

    /// Number of stored entries, `n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Root of the logical tree; `E[H]` when empty.
    pub fn root_digest(&self) -> Digest {
        self.root
            .as_ref()
            .map_or_else(|| self.ctx.empties.root(), |n| n.hash())
    }

    /// Stores `value_digest` at `key`'s leaf, replacing any previous value.
    /// Returns `true` if the key was new.
    pub fn insert(&mut self, key: &[u8], value_digest: Digest) -> Result<bool, TreeError> {
        let path = self.ctx.cfg.key_path(key);
        self.insert_path(&path, value_digest)
    }

    pub fn insert_path(&mut self, path: &PathBits, value_digest: Digest) -> Result<bool, TreeError> {
        if value_digest == self.ctx.empties.get(0) {
            return Err(TreeError::EmptyLeafValue);
        }
        let (root, added) = insert_node(&self.ctx, self.root.take(), 0, path, value_digest);
        self.root = Some(root);
        if added {
            self.len += 1;
        }
        Ok(added)
    }

    /// Removes `key`'s leaf. Leaves the tree untouched if absent.
    pub fn delete(&mut self, key: &[u8]) -> Result<Digest, TreeError> {
        let path = self.ctx.cfg.key_path(key);
        self.delete_path(&path)
    }

    /// Removes the leaf at `path`, returning the digest it held.
    pub fn delete_path(&mut self, path: &PathBits) -> Result<Digest, TreeError> {
        let old = self.lookup_path(path).ok_or(TreeError::NotFound)?;
        let root = self.root.take().expect("present key implies a root");
        self.root = delete_node(&self.ctx, *root, path);
        self.len -= 1;
        Ok(old)
    }

    pub fn lookup_digest(&self, key: &[u8]) -> Option<Digest> {
        self.lookup_path(&self.ctx.cfg.key_path(key))
    }

    pub fn lookup_path(&self, path: &PathBits) -> Option<Digest> {
        let mut node = self.root.as_deref()?;
        loop {
            match node {
                Node::Leaf { entry, .. } => {
                    return entry.path.same_leaf(path).then_some(entry.value);
                }
                Node::Branch {
                    stalk, children, ..
                } => {
                    if stalk.first_difference(path, stalk.start()).is_some() {
                        return None;
                    }
                    node = children[path.at(stalk.end()) as usize].as_deref()?;
                }
            }
        }
    }

    /// All `H` sibling pairs along `key`'s path, present or not.
    pub fn rootpath(&self, key: &[u8]) -> PathProof {
        self.rootpath_for_path(&self.ctx.cfg.key_path(key))
    }

    /// Walks branch nodes down the path collecting their children's hashes,
    /// then completes the list from the leaf node's own path (diverging into
    /// empty pairs where the query leaves it) or from the empty table.
    pub fn rootpath_for_path(&self, path: &PathBits) -> PathProof {
        let ctx = &self.ctx;
        let h = ctx.height();
        let mut pairs = Vec::with_capacity(h);
        let mut node = self.root.as_deref();
        let mut depth = 0;
        loop {
            match node {
                None => {
                    ctx.push_empty(&mut pairs, depth);
                    break;
                }
                Some(Node::Leaf { entry, .. }) => {
                    if let Some(left_at) =
                        ctx.push_run(&mut pairs, &entry.path, 0, entry.value, path)
                    {
                        ctx.push_empty(&mut pairs, left_at + 1);
                    }
                    break;
                }
                Some(Node::Branch {
                    stalk, children, ..
                }) => {
                    let left = children[0].as_ref().expect("two children").hash();
                    let right = children[1].as_ref().expect("two children").hash();
                    let split_hash = ctx.cfg.digest_pair(&left, &right);
                    if let Some(left_at) =
                        ctx.push_run(&mut pairs, stalk, h - stalk.end(), split_hash, path)
                    {
                        ctx.push_empty(&mut pairs, left_at + 1);
                        break;
                    }
                    pairs.push(HashPair::new(left, right));
                    let bit = path.at(stalk.end());
                    depth = stalk.end() + 1;
                    node = children[bit as usize].as_deref();
                }
            }
        }
        debug_assert_eq!(pairs.len(), h);
        PathProof::new(pairs)
    }

    /// Digest of the logical node at depth `prefix.len()` along `prefix`.
    pub fn subtree_root(&self, prefix: &[bool]) -> Digest {
        let h = self.ctx.height();
        assert!(prefix.len() <= h, "prefix longer than the tree");
        if prefix.is_empty() {
            return self.root_digest();
        }
        let mut bits = prefix.to_vec();
        bits.resize(h, false);
        let proof = self.rootpath_for_path(&PathBits::from_bits(&bits));
        proof.pairs[prefix.len() - 1].get(prefix[prefix.len() - 1])
    }

    /// Depth of the first empty sub-tree on `key`'s path, i.e. how many
    /// non-empty nodes a walk from the root passes before it can answer from
    /// the empty table. `None` when the path ends in a stored leaf.
    pub fn empty_depth(&self, key: &[u8]) -> Option<usize> {
        let path = self.ctx.cfg.key_path(key);
        let mut node = match self.root.as_deref() {
            None => return Some(0),
            Some(n) => n,
        };
        loop {
            match node {
                Node::Leaf { entry, .. } => {
                    return entry
                        .path
                        .first_difference(&path, entry.path.start())
                        .map(|p| p + 1);
                }
                Node::Branch {
                    stalk, children, ..
                } => {
                    if let Some(p) = stalk.first_difference(&path, stalk.start()) {
                        return Some(p + 1);
                    }
                    node = children[path.at(stalk.end()) as usize]
                        .as_deref()
                        .expect("two children");
                }
            }
        }
    }

    /// Every stored node in pre-order.
    pub fn nodes(&self) -> Vec<NodeView> {
        let mut out = Vec::new();
        let mut stack: Vec<&Node> = self.root.as_deref().into_iter().collect();
        while let Some(node) = stack.pop() {
            match node {
                Node::Leaf { entry, hash } => out.push(NodeView {
                    kind: NodeKind::Leaf,
                    depth: entry.path.start(),
                    end_depth: entry.path.end(),
                    hash: *hash,
                }),
                Node::Branch {
                    stalk,
                    children,
                    hash,
                } => {
                    out.push(NodeView {
                        kind: NodeKind::Branch,
                        depth: stalk.start(),
                        end_depth: stalk.end(),
                        hash: *hash,
                    });
                    stack.extend(children.iter().rev().filter_map(|c| c.as_deref()));
                }
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        self.nodes().len()
    }

    /// Depths of all leaf nodes.
    pub fn leaf_depths(&self) -> Vec<usize> {
        self.nodes()
            .into_iter()
            .filter(|n| n.kind == NodeKind::Leaf)
            .map(|n| n.depth)
            .collect()
    }

    /// Recomputes every stored hash from scratch and checks the structural
    /// invariants.
    pub fn audit(&self) -> Result<(), String> {
        let mut leaves = 0;
        if let Some(root) = self.root.as_deref() {
            self.audit_node(root, 0, &mut leaves)?;
        }
        if leaves != self.len {
            return Err(format!("{} leaf nodes but len {}", leaves, self.len));
        }
        Ok(())
    }

    fn audit_node(&self, node: &Node, depth: usize, leaves: &mut usize) -> Result<Digest, String> {
        let ctx = &self.ctx;
        let (expected, stored) = match node {
            Node::Leaf { entry, hash } => {
                *leaves += 1;
                if entry.path.start() != depth || entry.path.end() != ctx.height() {
                    return Err(format!("leaf at depth {depth} has path {:?}", entry.path));
                }
                if entry.value == ctx.empties.get(0) {
                    return Err("leaf stores the empty digest".into());
                }
                let mut h = entry.value;
                for pos in (depth..ctx.height()).rev() {
                    h = hash_ordered(
                        &ctx.cfg,
                        entry.path.at(pos),
                        &h,
                        &ctx.empties.get(ctx.height() - pos - 1),
                    );
                }
                (h, *hash)
            }
            Node::Branch {
                stalk,
                children,
                hash,
            } => {
                if stalk.start() != depth || stalk.end() >= ctx.height() {
                    return Err(format!("branch at depth {depth} has stalk {:?}", stalk));
                }
                let (Some(l), Some(r)) = (children[0].as_deref(), children[1].as_deref()) else {
                    return Err(format!("branch at depth {depth} lacks a child"));
                };
                let lh = self.audit_node(l, stalk.end() + 1, leaves)?;
                let rh = self.audit_node(r, stalk.end() + 1, leaves)?;
                let mut h = ctx.cfg.digest_pair(&lh, &rh);
                for pos in (depth..stalk.end()).rev() {
                    h = hash_ordered(
                        &ctx.cfg,
                        stalk.at(pos),
                        &h,
                        &ctx.empties.get(ctx.height() - pos - 1),
                    );
                }
                (h, *hash)
            }
        };
        if expected != stored {
            return Err(format!("stale hash at depth {depth}"));
        }
        Ok(stored)
    }
}
