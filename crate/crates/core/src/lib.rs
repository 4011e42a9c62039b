//! Keyed hash trees: an authenticated key-value store whose readers verify
//! every reply, including "no such entry", against a writer-signed root.

mod codec;
pub mod attester;
pub mod bench;
pub mod client;
pub mod credentials;
pub mod hash;
pub mod oracle;
pub mod proof;
pub mod services;
pub mod tree;

pub use codec::CodecError;
pub use hash::{Digest, EmptyTable, HashConfig, PathBits};
pub use proof::{PathProof, Reply, VerifyOutcome};
pub use tree::SparseTree;
