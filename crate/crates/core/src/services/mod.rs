//! Database and announcement servers, their wire protocol, persistence and
//! prefix sharding.

pub mod announce;
pub mod db;
pub mod server;
pub mod shard;
pub mod wal;
pub mod wire;

pub use announce::{AnnouncementService, AnnouncementState, PublishError};
pub use db::{Database, DbError, DbState};
pub use server::{serve, spawn, Service};
pub use shard::{combine_shard_roots, shard_index, ShardedTree};
pub use wal::{LogStore, MemoryLog, Wal, WalOp, WalRecord};
pub use wire::{Opcode, Request, Response, Status, WireError};
