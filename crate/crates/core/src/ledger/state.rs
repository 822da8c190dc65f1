//! Ledger indexes and the validation rules that maintain them.
//!
//! Rules, applied in timestamp order with identity transactions first on ties:
//! * each chain's timestamps never decrease;
//! * a claim needs `input == output`, a zero `prev_tx_id` and an unowned name;
//! * a transfer is signed by the current owner, points at the current
//!   ownership transaction and is later than every recorded version of the
//!   library, so ownership at a recorded timestamp never changes afterwards;
//! * a library record is signed by the owner at its own timestamp, is not
//!   older than that owner's ownership and is the first for its
//!   `(name, version)`.

use std::collections::HashMap;

use serde::Serialize;

use super::tx::{IdentityOp, IdentityTransaction, IntegrityError, LedgerTx, LibraryName, LibraryTransaction, PackedVersion};
use crate::crypto::PublicKey;
use crate::hash::Hash256;

/// One step of a library's ownership history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnershipRecord {
    pub owner: PublicKey,
    pub since: u64,
    pub transaction: IdentityTransaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    #[error("transaction integrity: {0}")]
    Integrity(IntegrityError),
    #[error("timestamp {timestamp} precedes the chain's latest {latest}")]
    TimestampRegression { timestamp: u64, latest: u64 },
    #[error("claim must name the signer as owner and reference no previous transaction")]
    MalformedClaim,
    #[error("{name} is already owned by {owner}")]
    AlreadyOwned { name: LibraryName, owner: PublicKey },
    #[error("{0} has never been claimed")]
    UnknownLibrary(LibraryName),
    #[error("signer does not own {0}")]
    NotOwner(LibraryName),
    #[error("transfer of {0} does not reference the current ownership transaction")]
    StaleHead(LibraryName),
    #[error("transfer of {0} is not later than its latest recorded version")]
    TransferPrecedesRecord(LibraryName),
    #[error("record for {0} predates its owner's ownership")]
    Backdated(LibraryName),
    #[error("{name} {version} is already registered")]
    DuplicateVersion { name: LibraryName, version: PackedVersion },
    #[error("would invalidate a transaction already queued")]
    DisplacesPending,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LedgerState {
    owners: HashMap<LibraryName, Vec<OwnershipRecord>>,
    library: HashMap<(LibraryName, PackedVersion), LibraryTransaction>,
    latest_record: HashMap<LibraryName, u64>,
    identity_ts: u64,
    library_ts: u64,
}

impl LedgerState {
    pub fn history(&self, name: &LibraryName) -> &[OwnershipRecord] {
        self.owners.get(name).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn head(&self, name: &LibraryName) -> Option<&OwnershipRecord> {
        self.history(name).last()
    }

    /// The ownership in force at `t`: the last record with `since <= t`.
    pub fn owner_at(&self, name: &LibraryName, t: u64) -> Option<&OwnershipRecord> {
        let h = self.history(name);
        let n = h.partition_point(|r| r.since <= t);
        n.checked_sub(1).map(|i| &h[i])
    }

    pub fn library(&self, name: &LibraryName, version: PackedVersion) -> Option<&LibraryTransaction> {
        self.library.get(&(name.clone(), version))
    }

    pub fn names(&self) -> impl Iterator<Item = &LibraryName> {
        self.owners.keys()
    }

    pub fn library_len(&self) -> usize {
        self.library.len()
    }

    pub fn check_identity(&self, tx: &IdentityTransaction) -> Result<(), RejectReason> {
        tx.check_integrity().map_err(RejectReason::Integrity)?;
        if tx.timestamp < self.identity_ts {
            return Err(RejectReason::TimestampRegression {
                timestamp: tx.timestamp,
                latest: self.identity_ts,
            });
        }
        let name = tx.library_name();
        match tx.content.op {
            IdentityOp::Claim => {
                if tx.input_pubkey != tx.output_pubkey || !tx.content.prev_tx_id.is_zero() {
                    return Err(RejectReason::MalformedClaim);
                }
                if let Some(head) = self.head(name) {
                    return Err(RejectReason::AlreadyOwned {
                        name: name.clone(),
                        owner: head.owner,
                    });
                }
            }
            IdentityOp::Transfer => {
                let head = self.head(name).ok_or_else(|| RejectReason::UnknownLibrary(name.clone()))?;
                if head.owner != tx.input_pubkey {
                    return Err(RejectReason::NotOwner(name.clone()));
                }
                if head.transaction.id != tx.content.prev_tx_id {
                    return Err(RejectReason::StaleHead(name.clone()));
                }
                if self.latest_record.get(name).is_some_and(|&r| tx.timestamp <= r) {
                    return Err(RejectReason::TransferPrecedesRecord(name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn check_library(&self, tx: &LibraryTransaction) -> Result<(), RejectReason> {
        tx.check_integrity().map_err(RejectReason::Integrity)?;
        if tx.timestamp < self.library_ts {
            return Err(RejectReason::TimestampRegression {
                timestamp: tx.timestamp,
                latest: self.library_ts,
            });
        }
        let name = &tx.library_name;
        let head = self.head(name).ok_or_else(|| RejectReason::NotOwner(name.clone()))?;
        let was_owner = self
            .owner_at(name, tx.timestamp)
            .is_some_and(|r| r.owner == tx.owner_pubkey);
        if head.owner != tx.owner_pubkey && !was_owner {
            return Err(RejectReason::NotOwner(name.clone()));
        }
        if head.owner != tx.owner_pubkey || tx.timestamp < head.since {
            return Err(RejectReason::Backdated(name.clone()));
        }
        if self.library(name, tx.version).is_some() {
            return Err(RejectReason::DuplicateVersion {
                name: name.clone(),
                version: tx.version,
            });
        }
        Ok(())
    }

    pub fn apply_identity(&mut self, tx: &IdentityTransaction) -> Result<(), RejectReason> {
        self.check_identity(tx)?;
        self.record_identity(tx);
        Ok(())
    }

    pub fn apply_library(&mut self, tx: &LibraryTransaction) -> Result<(), RejectReason> {
        self.check_library(tx)?;
        self.record_library(tx);
        Ok(())
    }

    /// Indexes without validating. Used for forensic loads of damaged chains.
    pub fn record_identity(&mut self, tx: &IdentityTransaction) {
        self.identity_ts = self.identity_ts.max(tx.timestamp);
        self.owners
            .entry(tx.library_name().clone())
            .or_default()
            .push(OwnershipRecord {
                owner: tx.output_pubkey,
                since: tx.timestamp,
                transaction: tx.clone(),
            });
    }

    pub fn record_library(&mut self, tx: &LibraryTransaction) {
        self.library_ts = self.library_ts.max(tx.timestamp);
        let latest = self.latest_record.entry(tx.library_name.clone()).or_default();
        *latest = (*latest).max(tx.timestamp);
        self.library
            .entry((tx.library_name.clone(), tx.version))
            .or_insert_with(|| tx.clone());
    }
}

/// A transaction of either chain, for validation in a shared order.
#[derive(Debug, Clone)]
pub(crate) enum AnyTx<'a> {
    Identity(&'a IdentityTransaction),
    Library(&'a LibraryTransaction),
}

impl AnyTx<'_> {
    pub fn order_key(&self) -> (u64, u8) {
        match self {
            AnyTx::Identity(t) => (t.timestamp, 0),
            AnyTx::Library(t) => (t.timestamp, 1),
        }
    }

    pub fn id(&self) -> Hash256 {
        match self {
            AnyTx::Identity(t) => t.id(),
            AnyTx::Library(t) => t.id(),
        }
    }

    pub fn check(&self, state: &LedgerState) -> Result<(), RejectReason> {
        match self {
            AnyTx::Identity(t) => state.check_identity(t),
            AnyTx::Library(t) => state.check_library(t),
        }
    }

    pub fn apply(&self, state: &mut LedgerState) -> Result<(), RejectReason> {
        match self {
            AnyTx::Identity(t) => state.apply_identity(t),
            AnyTx::Library(t) => state.apply_library(t),
        }
    }
}
