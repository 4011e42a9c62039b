//! Length-framed binary protocol shared by the database and announcement
//! servers. Big-endian throughout.
//!
//! Frame: `len(4) ‖ body`. Request body: `opcode(1) ‖ fields`. Response
//! body: `status(1) ‖ fields`; error statuses carry no fields.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::codec::{put_bytes32, CodecError, Reader};
use crate::credentials::{CredentialError, StateCredential};
use crate::hash::{Digest, HashConfig};
use crate::proof::{encoded_proof_len, PathProof, Reply};

pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;
pub const MAX_KEY_LEN: usize = 64 * 1024;
pub const MAX_VALUE_LEN: usize = 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Get = 0x01,
    Put = 0x02,
    Delete = 0x03,
    Rootpath = 0x04,
    Root = 0x05,
    Publish = 0x10,
    Fetch = 0x11,
}

impl Opcode {
    pub fn from_byte(b: u8) -> Option<Opcode> {
        Some(match b {
            0x01 => Opcode::Get,
            0x02 => Opcode::Put,
            0x03 => Opcode::Delete,
            0x04 => Opcode::Rootpath,
            0x05 => Opcode::Root,
            0x10 => Opcode::Publish,
            0x11 => Opcode::Fetch,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    /// Also PRESENT for GET.
    Ok = 0x00,
    Absent = 0x01,
    RejectSig = 0x10,
    RejectStale = 0x11,
    Empty = 0x12,
    NotFound = 0x20,
    /// The key's leaf is already held by a different key.
    PathCollision = 0x21,
    ProtoMalformed = 0x30,
    ProtoOversize = 0x31,
    UnknownOpcode = 0x32,
}

impl Status {
    pub fn from_byte(b: u8) -> Option<Status> {
        Some(match b {
            0x00 => Status::Ok,
            0x01 => Status::Absent,
            0x10 => Status::RejectSig,
            0x11 => Status::RejectStale,
            0x12 => Status::Empty,
            0x20 => Status::NotFound,
            0x21 => Status::PathCollision,
            0x30 => Status::ProtoMalformed,
            0x31 => Status::ProtoOversize,
            0x32 => Status::UnknownOpcode,
            _ => return None,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("field or frame exceeds its size limit")]
    Oversize,
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u8),
    #[error("unknown status {0:#04x}")]
    UnknownStatus(u8),
}

impl WireError {
    /// Status a server answers with.
    pub fn status(&self) -> Status {
        match self {
            WireError::Malformed(_) | WireError::UnknownStatus(_) => Status::ProtoMalformed,
            WireError::Oversize => Status::ProtoOversize,
            WireError::UnknownOpcode(_) => Status::UnknownOpcode,
        }
    }
}

impl From<CodecError> for WireError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::TooLong(_) => WireError::Oversize,
            other => WireError::Malformed(other.to_string()),
        }
    }
}

impl From<CredentialError> for WireError {
    fn from(e: CredentialError) -> Self {
        match e {
            CredentialError::Malformed(c) => c.into(),
            other => WireError::Malformed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    Get { key: Vec<u8> },
    Put { key: Vec<u8>, value: Vec<u8> },
    Delete { key: Vec<u8> },
    Rootpath { key: Vec<u8> },
    Root,
    Publish(StateCredential),
    Fetch,
}

impl Request {
    pub fn opcode(&self) -> Opcode {
        match self {
            Request::Get { .. } => Opcode::Get,
            Request::Put { .. } => Opcode::Put,
            Request::Delete { .. } => Opcode::Delete,
            Request::Rootpath { .. } => Opcode::Rootpath,
            Request::Root => Opcode::Root,
            Request::Publish(_) => Opcode::Publish,
            Request::Fetch => Opcode::Fetch,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.opcode() as u8];
        match self {
            Request::Get { key } | Request::Delete { key } | Request::Rootpath { key } => {
                put_bytes32(&mut out, key)
            }
            Request::Put { key, value } => {
                put_bytes32(&mut out, key);
                put_bytes32(&mut out, value);
            }
            Request::Publish(cred) => out.extend_from_slice(&cred.encode()),
            Request::Root | Request::Fetch => {}
        }
        out
    }

    pub fn decode(body: &[u8]) -> Result<Request, WireError> {
        let mut r = Reader::new(body);
        let op = r.u8().map_err(|_| WireError::Malformed("empty body".into()))?;
        let op = Opcode::from_byte(op).ok_or(WireError::UnknownOpcode(op))?;
        let req = match op {
            Opcode::Get => Request::Get {
                key: r.bytes32(MAX_KEY_LEN)?.to_vec(),
            },
            Opcode::Put => Request::Put {
                key: r.bytes32(MAX_KEY_LEN)?.to_vec(),
                value: r.bytes32(MAX_VALUE_LEN)?.to_vec(),
            },
            Opcode::Delete => Request::Delete {
                key: r.bytes32(MAX_KEY_LEN)?.to_vec(),
            },
            Opcode::Rootpath => Request::Rootpath {
                key: r.bytes32(MAX_KEY_LEN)?.to_vec(),
            },
            Opcode::Root => Request::Root,
            Opcode::Publish => Request::Publish(StateCredential::read(&mut r)?),
            Opcode::Fetch => Request::Fetch,
        };
        r.finish()?;
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Response {
    /// GET answer.
    Entry { reply: Reply, proof: PathProof },
    /// PUT, DELETE and ROOT answer.
    Root(Digest),
    /// ROOTPATH answer.
    Path(PathProof),
    /// PUBLISH accepted.
    Published,
    /// FETCH answer.
    Credential(StateCredential),
    /// Any status without fields: errors and EMPTY.
    Status(Status),
}

impl Response {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Response::Entry { reply, proof } => {
                match reply {
                    Reply::Present(v) => {
                        out.push(Status::Ok as u8);
                        put_bytes32(&mut out, v);
                    }
                    Reply::Absent => out.push(Status::Absent as u8),
                }
                out.extend_from_slice(&proof.encode());
            }
            Response::Root(d) => {
                out.push(Status::Ok as u8);
                out.extend_from_slice(d.as_bytes());
            }
            Response::Path(p) => {
                out.push(Status::Ok as u8);
                out.extend_from_slice(&p.encode());
            }
            Response::Published => out.push(Status::Ok as u8),
            Response::Credential(c) => {
                out.push(Status::Ok as u8);
                out.extend_from_slice(&c.encode());
            }
            Response::Status(s) => out.push(*s as u8),
        }
        out
    }

    /// Decodes the answer to a request with opcode `op`.
    pub fn decode(cfg: &HashConfig, op: Opcode, body: &[u8]) -> Result<Response, WireError> {
        let mut r = Reader::new(body);
        let b = r.u8().map_err(|_| WireError::Malformed("empty body".into()))?;
        let status = Status::from_byte(b).ok_or(WireError::UnknownStatus(b))?;
        let proof = |r: &mut Reader<'_>| -> Result<PathProof, WireError> {
            PathProof::decode(cfg, r.take(encoded_proof_len(cfg))?)
                .map_err(|e| WireError::Malformed(e.to_string()))
        };
        let resp = match (op, status) {
            (Opcode::Get, Status::Ok) => {
                let value = r.bytes32(MAX_VALUE_LEN)?.to_vec();
                Response::Entry {
                    reply: Reply::Present(value),
                    proof: proof(&mut r)?,
                }
            }
            (Opcode::Get, Status::Absent) => Response::Entry {
                reply: Reply::Absent,
                proof: proof(&mut r)?,
            },
            (Opcode::Put | Opcode::Delete | Opcode::Root, Status::Ok) => {
                let d = Digest::from_slice(r.take(cfg.digest_len())?).expect("digest length");
                Response::Root(d)
            }
            (Opcode::Rootpath, Status::Ok) => Response::Path(proof(&mut r)?),
            (Opcode::Publish, Status::Ok) => Response::Published,
            (Opcode::Fetch, Status::Ok) => Response::Credential(StateCredential::read(&mut r)?),
            (_, s) if s != Status::Ok && s != Status::Absent => Response::Status(s),
            (op, s) => {
                return Err(WireError::Malformed(format!(
                    "status {s:?} is not an answer to {op:?}"
                )))
            }
        };
        r.finish()?;
        Ok(resp)
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("frame of {0} bytes exceeds the limit")]
    Oversize(usize),
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, FrameError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME_LEN {
        return Err(FrameError::Oversize(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8]) -> io::Result<()> {
    if body.len() > MAX_FRAME_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame too large"));
    }
    let mut buf = Vec::with_capacity(4 + body.len());
    buf.extend_from_slice(&(body.len() as u32).to_be_bytes());
    buf.extend_from_slice(body);
    w.write_all(&buf)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn get_frame_layout() {
        let mut out = Vec::new();
        write_frame(&mut out, &Request::Get { key: b"k".to_vec() }.encode()).unwrap();
        assert_eq!(out, [0, 0, 0, 6, 0x01, 0, 0, 0, 1, b'k']);
    }

    #[test]
    fn oversize_frame_is_refused_before_reading_body() {
        let mut input: &[u8] = &((MAX_FRAME_LEN + 1) as u32).to_be_bytes();
        assert!(matches!(read_frame(&mut input), Err(FrameError::Oversize(_))));
    }

    #[test]
    fn decode_errors_are_distinct() {
        assert_eq!(Request::decode(&[0x99]), Err(WireError::UnknownOpcode(0x99)));
        assert_eq!(Request::decode(&[0x99]).unwrap_err().status(), Status::UnknownOpcode);
        let trunc = Request::decode(&[0x01, 0, 0, 0, 5, b'k']).unwrap_err();
        assert_eq!(trunc.status(), Status::ProtoMalformed);
        let mut big = vec![0x01];
        big.extend_from_slice(&((MAX_KEY_LEN + 1) as u32).to_be_bytes());
        assert_eq!(Request::decode(&big).unwrap_err().status(), Status::ProtoOversize);
        assert_eq!(Request::decode(&[0x05, 0]).unwrap_err().status(), Status::ProtoMalformed);
    }

    #[test]
    fn error_status_decodes_for_any_opcode() {
        let cfg = HashConfig::toy();
        let body = Response::Status(Status::NotFound).encode();
        assert_eq!(
            Response::decode(&cfg, Opcode::Delete, &body).unwrap(),
            Response::Status(Status::NotFound)
        );
    }
}
