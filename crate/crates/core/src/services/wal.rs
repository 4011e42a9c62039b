//! Append-only replay log for the database.
//!
//! Record: `op(1) ‖ seq(8) ‖ keylen(4) ‖ key ‖ [vallen(4) ‖ value] ‖
//! crc32(4)`, the checksum covering everything before it. `seq` is the
//! database's own mutation counter. Replay stops at the first torn or
//! corrupt record and the file is cut back to the last good one.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::codec::{put_bytes32, Reader};
use crate::services::wire::{MAX_KEY_LEN, MAX_VALUE_LEN};

const OP_PUT: u8 = 0x01;
const OP_DELETE: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WalOp {
    Put { key: Vec<u8>, value: Vec<u8> },
    Delete { key: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalRecord {
    pub seq: u64,
    pub op: WalOp,
}

impl WalRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match &self.op {
            WalOp::Put { key, value } => {
                out.push(OP_PUT);
                out.extend_from_slice(&self.seq.to_be_bytes());
                put_bytes32(&mut out, key);
                put_bytes32(&mut out, value);
            }
            WalOp::Delete { key } => {
                out.push(OP_DELETE);
                out.extend_from_slice(&self.seq.to_be_bytes());
                put_bytes32(&mut out, key);
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    /// Parses one record from the front of `buf`; returns it and its length.
    pub fn decode_prefix(buf: &[u8]) -> Option<(WalRecord, usize)> {
        let mut r = Reader::new(buf);
        let op = r.u8().ok()?;
        let seq = r.u64().ok()?;
        let key = r.bytes32(MAX_KEY_LEN).ok()?.to_vec();
        let op = match op {
            OP_PUT => WalOp::Put {
                key,
                value: r.bytes32(MAX_VALUE_LEN).ok()?.to_vec(),
            },
            OP_DELETE => WalOp::Delete { key },
            _ => return None,
        };
        let body_len = r.position();
        let crc = r.u32().ok()?;
        if crc32fast::hash(&buf[..body_len]) != crc {
            return None;
        }
        Some((WalRecord { seq, op }, body_len + 4))
    }
}

/// Where the database appends its records.
pub trait LogStore: Send {
    /// Durably appends one encoded record. On error nothing may be
    /// considered written.
    fn append(&mut self, record: &[u8]) -> io::Result<()>;
}

/// Log kept in memory only.
#[derive(Debug, Default)]
pub struct MemoryLog {
    pub bytes: Vec<u8>,
}

impl LogStore for MemoryLog {
    fn append(&mut self, record: &[u8]) -> io::Result<()> {
        self.bytes.extend_from_slice(record);
        Ok(())
    }
}

/// Result of opening a log file.
#[derive(Debug, Default)]
pub struct Replay {
    pub records: Vec<WalRecord>,
    /// Bytes dropped from a torn or corrupt tail.
    pub truncated_bytes: u64,
}

#[derive(Debug)]
pub struct Wal {
    file: File,
    path: PathBuf,
    len: u64,
}

impl Wal {
    /// Opens or creates the log, returning the intact records.
    pub fn open(path: &Path) -> io::Result<(Wal, Replay)> {
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let mut replay = Replay::default();
        let mut pos = 0usize;
        while pos < buf.len() {
            match WalRecord::decode_prefix(&buf[pos..]) {
                Some((rec, n)) => {
                    replay.records.push(rec);
                    pos += n;
                }
                None => break,
            }
        }
        replay.truncated_bytes = (buf.len() - pos) as u64;
        if replay.truncated_bytes > 0 {
            file.set_len(pos as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::Start(pos as u64))?;
        Ok((
            Wal {
                file,
                path: path.to_path_buf(),
                len: pos as u64,
            },
            replay,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl LogStore for Wal {
    fn append(&mut self, record: &[u8]) -> io::Result<()> {
        let res = self
            .file
            .write_all(record)
            .and_then(|()| self.file.sync_data());
        match res {
            Ok(()) => {
                self.len += record.len() as u64;
                Ok(())
            }
            Err(e) => {
                // drop any partial write so the next record starts clean
                let _ = self.file.set_len(self.len);
                let _ = self.file.seek(SeekFrom::Start(self.len));
                Err(e)
            }
        }
    }
}
