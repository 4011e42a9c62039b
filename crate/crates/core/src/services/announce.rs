//! Announcement service: one slot holding the latest state credential.
//!
//! Only signature-valid credentials with a strictly larger `seq` replace the
//! slot, so a replayed older credential can never be re-installed.

use std::sync::RwLock;

use thiserror::Error;

use crate::credentials::{verify_credential, KeyRing, StateCredential};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PublishError {
    #[error("credential signature does not verify")]
    BadSignature,
    #[error("credential seq {got} is not above the current {latest}")]
    Stale { latest: u64, got: u64 },
}

#[derive(Debug, Clone)]
pub struct AnnouncementState {
    latest: Option<StateCredential>,
    keys: KeyRing,
}

impl AnnouncementState {
    pub fn new(keys: KeyRing) -> Self {
        AnnouncementState { latest: None, keys }
    }

    pub fn publish(&mut self, cred: StateCredential) -> Result<(), PublishError> {
        verify_credential(&cred, &self.keys).map_err(|_| PublishError::BadSignature)?;
        let latest = self.latest.as_ref().map_or(0, |c| c.seq);
        if cred.seq <= latest {
            return Err(PublishError::Stale {
                latest,
                got: cred.seq,
            });
        }
        self.latest = Some(cred);
        Ok(())
    }

    pub fn fetch(&self) -> Option<&StateCredential> {
        self.latest.as_ref()
    }
}

/// Thread-safe wrapper: publishes serialize, fetches run concurrently.
#[derive(Debug)]
pub struct AnnouncementService {
    state: RwLock<AnnouncementState>,
}

impl AnnouncementService {
    pub fn new(keys: KeyRing) -> Self {
        AnnouncementService {
            state: RwLock::new(AnnouncementState::new(keys)),
        }
    }

    pub fn publish(&self, cred: StateCredential) -> Result<(), PublishError> {
        self.state
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .publish(cred)
    }

    pub fn fetch(&self) -> Option<StateCredential> {
        self.state
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .fetch()
            .cloned()
    }
}
