//! Request dispatch and a thread-per-connection TCP server.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use crate::services::announce::{AnnouncementService, PublishError};
use crate::services::db::{Database, DbError};
use crate::services::wire::{read_frame, write_frame, FrameError, Request, Response, Status};

/// Anything that answers request bodies with response bodies.
pub trait Service: Send + Sync + 'static {
    fn handle(&self, body: &[u8]) -> Vec<u8>;
}

fn db_status(e: &DbError) -> Status {
    match e {
        DbError::NotFound => Status::NotFound,
        DbError::PathCollision => Status::PathCollision,
        DbError::Malformed(_) => Status::ProtoMalformed,
        DbError::Oversize => Status::ProtoOversize,
        // the mutation was not applied; the client may retry
        DbError::Io(_) => Status::ProtoMalformed,
    }
}

impl Database {
    pub fn respond(&self, req: Request) -> Response {
        match req {
            Request::Get { key } => {
                let (reply, proof) = self.get(&key);
                Response::Entry { reply, proof }
            }
            Request::Put { key, value } => match self.put(&key, &value) {
                Ok(root) => Response::Root(root),
                Err(e) => Response::Status(db_status(&e)),
            },
            Request::Delete { key } => match self.delete(&key) {
                Ok(root) => Response::Root(root),
                Err(e) => Response::Status(db_status(&e)),
            },
            Request::Rootpath { key } => Response::Path(self.rootpath(&key)),
            Request::Root => Response::Root(self.root()),
            Request::Publish(_) | Request::Fetch => Response::Status(Status::UnknownOpcode),
        }
    }
}

impl Service for Database {
    fn handle(&self, body: &[u8]) -> Vec<u8> {
        match Request::decode(body) {
            Ok(req) => self.respond(req).encode(),
            Err(e) => Response::Status(e.status()).encode(),
        }
    }
}

impl AnnouncementService {
    pub fn respond(&self, req: Request) -> Response {
        match req {
            Request::Publish(cred) => match self.publish(cred) {
                Ok(()) => Response::Published,
                Err(PublishError::BadSignature) => Response::Status(Status::RejectSig),
                Err(PublishError::Stale { .. }) => Response::Status(Status::RejectStale),
            },
            Request::Fetch => match self.fetch() {
                Some(c) => Response::Credential(c),
                None => Response::Status(Status::Empty),
            },
            _ => Response::Status(Status::UnknownOpcode),
        }
    }
}

impl Service for AnnouncementService {
    fn handle(&self, body: &[u8]) -> Vec<u8> {
        match Request::decode(body) {
            Ok(req) => self.respond(req).encode(),
            Err(e) => Response::Status(e.status()).encode(),
        }
    }
}

fn serve_connection<S: Service + ?Sized>(service: &S, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let Ok(write_half) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let mut writer = BufWriter::new(write_half);
    loop {
        match read_frame(&mut reader) {
            Ok(Some(body)) => {
                if write_frame(&mut writer, &service.handle(&body)).is_err() {
                    return;
                }
            }
            Ok(None) | Err(FrameError::Io(_)) => return,
            Err(FrameError::Oversize(_)) => {
                // the stream cannot be resynchronized after an unread body
                let body = Response::Status(Status::ProtoOversize).encode();
                let _ = write_frame(&mut writer, &body);
                return;
            }
        }
    }
}

/// Accepts connections forever, one thread each.
pub fn serve<S: Service + ?Sized>(listener: TcpListener, service: Arc<S>) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { continue };
        let service = Arc::clone(&service);
        thread::spawn(move || serve_connection(&*service, stream));
    }
}

/// Binds `addr` and serves in a background thread; returns the bound address.
pub fn spawn<S: Service + ?Sized>(addr: &str, service: Arc<S>) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    thread::spawn(move || serve(listener, service));
    Ok(local)
}
