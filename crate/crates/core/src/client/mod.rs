//! Client side: transports, typed endpoints for both servers, the writer
//! pipeline, reply classification for readers, and the test harnesses that
//! play a misbehaving database or an unreliable network.

pub mod fault;
pub mod harness;
pub mod reader;
pub mod writer;

use std::io::{self, BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::credentials::StateCredential;
use crate::hash::{Digest, HashConfig};
use crate::proof::{PathProof, Reply};
use crate::services::wire::{read_frame, write_frame, FrameError, Request, Response, Status, WireError};
use crate::services::Service;

pub use fault::{FaultPlan, FaultyAnnounce, FaultyDb};
pub use harness::{Attack, MaliciousDb};
pub use reader::{classify_reply, AttackKind, ReaderSession, VerifiedReply};
pub use writer::{WriterError, WriterSession};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport: {0}")]
    Io(#[from] io::Error),
    #[error("protocol: {0}")]
    Wire(#[from] WireError),
    #[error("server answered {0:?}")]
    Status(Status),
    #[error("connection closed by server")]
    Closed,
}

impl ClientError {
    /// True for failures of the channel rather than of the answer.
    pub fn is_transport(&self) -> bool {
        matches!(self, ClientError::Io(_) | ClientError::Closed)
    }
}

/// Carries one request body and returns the response body.
pub trait Transport: Send + Sync {
    fn call(&self, body: &[u8]) -> Result<Vec<u8>, ClientError>;
}

/// In-process transport straight into a service.
impl<S: Service + ?Sized> Transport for Arc<S> {
    fn call(&self, body: &[u8]) -> Result<Vec<u8>, ClientError> {
        Ok(self.handle(body))
    }
}

pub struct TcpTransport {
    conn: Mutex<(BufReader<TcpStream>, BufWriter<TcpStream>)>,
}

impl TcpTransport {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let w = stream.try_clone()?;
        Ok(TcpTransport {
            conn: Mutex::new((BufReader::new(stream), BufWriter::new(w))),
        })
    }
}

impl Transport for TcpTransport {
    fn call(&self, body: &[u8]) -> Result<Vec<u8>, ClientError> {
        let mut conn = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        let (r, w) = &mut *conn;
        write_frame(w, body)?;
        match read_frame(r) {
            Ok(Some(b)) => Ok(b),
            Ok(None) => Err(ClientError::Closed),
            Err(FrameError::Io(e)) => Err(e.into()),
            Err(FrameError::Oversize(_)) => Err(WireError::Oversize.into()),
        }
    }
}

/// Database operations a client needs.
pub trait DbEndpoint {
    fn get(&self, key: &[u8]) -> Result<(Reply, PathProof), ClientError>;
    fn put(&self, key: &[u8], value: &[u8]) -> Result<Digest, ClientError>;
    fn delete(&self, key: &[u8]) -> Result<Digest, ClientError>;
    fn rootpath(&self, key: &[u8]) -> Result<PathProof, ClientError>;
    fn root(&self) -> Result<Digest, ClientError>;
}

/// Announcement operations a client needs.
pub trait AnnounceEndpoint {
    /// `None` when nothing has been published yet.
    fn fetch(&self) -> Result<Option<StateCredential>, ClientError>;
    fn publish(&self, cred: &StateCredential) -> Result<(), ClientError>;
}

impl<T: DbEndpoint + ?Sized> DbEndpoint for &T {
    fn get(&self, key: &[u8]) -> Result<(Reply, PathProof), ClientError> {
        (**self).get(key)
    }
    fn put(&self, key: &[u8], value: &[u8]) -> Result<Digest, ClientError> {
        (**self).put(key, value)
    }
    fn delete(&self, key: &[u8]) -> Result<Digest, ClientError> {
        (**self).delete(key)
    }
    fn rootpath(&self, key: &[u8]) -> Result<PathProof, ClientError> {
        (**self).rootpath(key)
    }
    fn root(&self) -> Result<Digest, ClientError> {
        (**self).root()
    }
}

impl<T: AnnounceEndpoint + ?Sized> AnnounceEndpoint for &T {
    fn fetch(&self) -> Result<Option<StateCredential>, ClientError> {
        (**self).fetch()
    }
    fn publish(&self, cred: &StateCredential) -> Result<(), ClientError> {
        (**self).publish(cred)
    }
}

/// Typed client over any transport; speaks both servers' protocol.
pub struct Client<T> {
    cfg: HashConfig,
    transport: T,
}

impl<T: Transport> Client<T> {
    pub fn new(cfg: HashConfig, transport: T) -> Self {
        Client { cfg, transport }
    }

    pub fn cfg(&self) -> &HashConfig {
        &self.cfg
    }

    pub fn call(&self, req: &Request) -> Result<Response, ClientError> {
        let body = self.transport.call(&req.encode())?;
        Ok(Response::decode(&self.cfg, req.opcode(), &body)?)
    }

    fn root_call(&self, req: &Request) -> Result<Digest, ClientError> {
        match self.call(req)? {
            Response::Root(d) => Ok(d),
            Response::Status(s) => Err(ClientError::Status(s)),
            _ => Err(unexpected()),
        }
    }
}

fn unexpected() -> ClientError {
    WireError::Malformed("unexpected response kind".into()).into()
}

impl Client<TcpTransport> {
    pub fn connect<A: ToSocketAddrs>(cfg: HashConfig, addr: A) -> io::Result<Self> {
        Ok(Client::new(cfg, TcpTransport::connect(addr)?))
    }
}

impl<T: Transport> DbEndpoint for Client<T> {
    fn get(&self, key: &[u8]) -> Result<(Reply, PathProof), ClientError> {
        match self.call(&Request::Get { key: key.to_vec() })? {
            Response::Entry { reply, proof } => Ok((reply, proof)),
            Response::Status(s) => Err(ClientError::Status(s)),
            _ => Err(unexpected()),
        }
    }

    fn put(&self, key: &[u8], value: &[u8]) -> Result<Digest, ClientError> {
        self.root_call(&Request::Put {
            key: key.to_vec(),
            value: value.to_vec(),
        })
    }

    fn delete(&self, key: &[u8]) -> Result<Digest, ClientError> {
        self.root_call(&Request::Delete { key: key.to_vec() })
    }

    fn rootpath(&self, key: &[u8]) -> Result<PathProof, ClientError> {
        match self.call(&Request::Rootpath { key: key.to_vec() })? {
            Response::Path(p) => Ok(p),
            Response::Status(s) => Err(ClientError::Status(s)),
            _ => Err(unexpected()),
        }
    }

    fn root(&self) -> Result<Digest, ClientError> {
        self.root_call(&Request::Root)
    }
}

impl<T: Transport> AnnounceEndpoint for Client<T> {
    fn fetch(&self) -> Result<Option<StateCredential>, ClientError> {
        match self.call(&Request::Fetch)? {
            Response::Credential(c) => Ok(Some(c)),
            Response::Status(Status::Empty) => Ok(None),
            Response::Status(s) => Err(ClientError::Status(s)),
            _ => Err(unexpected()),
        }
    }

    fn publish(&self, cred: &StateCredential) -> Result<(), ClientError> {
        match self.call(&Request::Publish(cred.clone()))? {
            Response::Published => Ok(()),
            Response::Status(s) => Err(ClientError::Status(s)),
            _ => Err(unexpected()),
        }
    }
}
