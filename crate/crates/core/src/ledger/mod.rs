//! Dual-ledger reference repository.
//!
//! The identity chain records who owns each library name (claims and
//! transfers). The library chain records one artifact hash per
//! `(name, version)`, accepted only from the owner at that time. A single
//! sequencer validates pending transactions and seals them into hash-chained
//! blocks; consensus is not modelled, only a confirmation delay.

mod audit;
mod block;
mod persist;
mod state;
mod tx;

pub use audit::{audit_bytes, audit_dir, AuditFinding, AuditReport, FindingKind};
pub use block::{body_hash, encode_chain, Block, BlockHeader, HEADER_LEN};
pub use persist::{IDENTITY_CHAIN_FILE, IDENTITY_PENDING_FILE, LIBRARY_CHAIN_FILE, LIBRARY_PENDING_FILE, LEDGER_DIR_ENV};
pub use state::{OwnershipRecord, RejectReason};
pub use tx::{
    CodecError, IdentityContent, IdentityOp, IdentityTransaction, IntegrityError, LedgerTx, LibraryName,
    LibraryTransaction, PackedVersion, CONTENT_LEN, IDENTITY_TX_LEN, LIBRARY_TX_LEN, NAME_LEN,
};

use std::fmt;
use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::crypto::{Keypair, PublicKey};
use crate::ecosystem::PackageCoords;
use crate::feasibility::CONFIRMATION_DELAY_MS;
use crate::hash::Hash256;
use crate::registry::{ReferenceProvider, RegistryError, RegistryRecord};
use state::{AnyTx, LedgerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Identity,
    Library,
}

impl fmt::Display for ChainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainKind::Identity => "identity",
            ChainKind::Library => "library",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{name} is already owned by {owner}")]
    AlreadyOwned { name: String, owner: PublicKey },
    #[error("caller does not own {0}")]
    NotOwner(String),
    #[error("{0} has never been claimed")]
    UnknownLibrary(String),
    #[error("{name} {version} is already registered")]
    DuplicateVersion { name: String, version: String },
    #[error("{name} {version} is not on the ledger")]
    NotFound { name: String, version: String },
    #[error("{what}: {error}")]
    BadSignature { what: &'static str, error: IntegrityError },
    #[error("{name} {version} was recorded by a key that did not own the library at the time")]
    OwnershipMismatch { name: String, version: String },
    #[error("transaction rejected: {0}")]
    Rejected(RejectReason),
    #[error("nothing pending on the {0} chain")]
    EmptyPending(String),
    #[error("ledger integrity check failed with {} finding(s)", .0.findings.len())]
    Corrupt(AuditReport),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<RejectReason> for LedgerError {
    fn from(r: RejectReason) -> Self {
        match r {
            RejectReason::AlreadyOwned { name, owner } => LedgerError::AlreadyOwned {
                name: name.to_string(),
                owner,
            },
            RejectReason::NotOwner(n) => LedgerError::NotOwner(n.to_string()),
            RejectReason::UnknownLibrary(n) => LedgerError::UnknownLibrary(n.to_string()),
            RejectReason::DuplicateVersion { name, version } => LedgerError::DuplicateVersion {
                name: name.to_string(),
                version: version.to_string(),
            },
            other => LedgerError::Rejected(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerConfig {
    /// Simulated time from sealing to confirmation.
    pub confirmation_delay_ms: u64,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            confirmation_delay_ms: CONFIRMATION_DELAY_MS,
        }
    }
}

impl LedgerConfig {
    pub const fn instant() -> Self {
        LedgerConfig {
            confirmation_delay_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SealedBlock {
    pub chain: ChainKind,
    pub height: u64,
    pub timestamp: u64,
    pub tx_count: u32,
    pub hash: Hash256,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxRejection {
    pub chain: ChainKind,
    pub tx_id: Hash256,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SealOutcome {
    pub blocks: Vec<SealedBlock>,
    pub accepted: usize,
    pub rejected: Vec<TxRejection>,
    /// Block timestamp plus the confirmation delay, when a block was sealed.
    pub confirmed_at: Option<u64>,
}

impl SealOutcome {
    pub fn block(&self, chain: ChainKind) -> Option<&SealedBlock> {
        self.blocks.iter().find(|b| b.chain == chain)
    }
}

/// Who owned the library when the record was made, and the transaction
/// proving it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OwnerProof {
    pub owner: PublicKey,
    pub ownership_tx_id: Hash256,
    pub owned_since: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedEntry {
    pub transaction: LibraryTransaction,
    pub proof: OwnerProof,
}

#[derive(Debug, Clone)]
struct Pending<T> {
    seq: u64,
    tx: T,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct DualLedger {
    config: LedgerConfig,
    identity: Vec<Block<IdentityTransaction>>,
    library: Vec<Block<LibraryTransaction>>,
    identity_pending: Vec<Pending<IdentityTransaction>>,
    library_pending: Vec<Pending<LibraryTransaction>>,
    next_seq: u64,
    sealed: LedgerState,
    /// Sealed state plus every pending transaction that would be accepted.
    projected: LedgerState,
    /// Largest validation-order key among pending transactions.
    pending_max_key: Option<(u64, u8)>,
    latest_ts: u64,
}

impl Default for DualLedger {
    fn default() -> Self {
        Self::new(LedgerConfig::default())
    }
}

impl DualLedger {
    pub fn new(config: LedgerConfig) -> Self {
        DualLedger {
            config,
            identity: Vec::new(),
            library: Vec::new(),
            identity_pending: Vec::new(),
            library_pending: Vec::new(),
            next_seq: 0,
            sealed: LedgerState::default(),
            projected: LedgerState::default(),
            pending_max_key: None,
            latest_ts: 0,
        }
    }

    pub fn config(&self) -> LedgerConfig {
        self.config
    }

    pub fn set_config(&mut self, config: LedgerConfig) {
        self.config = config;
    }

    /// A wall-clock timestamp strictly after everything the ledger has seen.
    pub fn next_timestamp(&self) -> u64 {
        now_ms().max(self.latest_ts + 1)
    }

    fn note_ts(&mut self, ts: u64) {
        self.latest_ts = self.latest_ts.max(ts);
    }

    // ---- submission -------------------------------------------------------

    fn merged_pending(&self) -> Vec<(u64, AnyTx<'_>)> {
        let mut all: Vec<(u64, AnyTx<'_>)> = self
            .identity_pending
            .iter()
            .map(|p| (p.seq, AnyTx::Identity(&p.tx)))
            .chain(self.library_pending.iter().map(|p| (p.seq, AnyTx::Library(&p.tx))))
            .collect();
        all.sort_by_key(|(seq, tx)| (tx.order_key(), *seq));
        all
    }

    fn rebuild_projection(&mut self) {
        let mut projected = self.sealed.clone();
        let mut max_key = None;
        for (_, tx) in self.merged_pending() {
            max_key = max_key.max(Some(tx.order_key()));
            let _ = tx.apply(&mut projected);
        }
        self.projected = projected;
        self.pending_max_key = max_key;
    }

    /// Whether `tx` would be validated after everything already pending.
    fn sorts_last(&self, tx: &AnyTx<'_>) -> bool {
        self.pending_max_key.is_none_or(|k| tx.order_key() >= k)
    }

    /// Validates `tx` against sealed plus pending state without queueing it.
    /// A transaction that would slot in before pending ones must also leave
    /// every pending acceptance unchanged.
    fn check_projected(&self, tx: AnyTx<'_>) -> Result<(), RejectReason> {
        if self.sorts_last(&tx) {
            return tx.check(&self.projected);
        }
        let replay = |extra: Option<&AnyTx<'_>>| {
            let mut state = self.sealed.clone();
            let mut all = self.merged_pending();
            all.extend(extra.map(|t| (u64::MAX, t.clone())));
            all.sort_by_key(|(seq, t)| (t.order_key(), *seq));
            all.into_iter()
                .map(|(seq, t)| (seq, t.apply(&mut state)))
                .collect::<Vec<_>>()
        };
        let before = replay(None);
        let mut verdict = Ok(());
        let mut after_ok = Vec::new();
        for (seq, r) in replay(Some(&tx)) {
            if seq == u64::MAX {
                verdict = r;
            } else {
                after_ok.push((seq, r.is_ok()));
            }
        }
        verdict?;
        let mut before_ok: Vec<(u64, bool)> = before.into_iter().map(|(s, r)| (s, r.is_ok())).collect();
        before_ok.sort_unstable();
        after_ok.sort_unstable();
        if before_ok != after_ok {
            return Err(RejectReason::DisplacesPending);
        }
        Ok(())
    }

    fn push(&mut self, tx: AnyTx<'_>) {
        self.note_ts(tx.order_key().0);
        let seq = self.next_seq;
        self.next_seq += 1;
        let last = self.sorts_last(&tx);
        if last {
            self.pending_max_key = Some(tx.order_key());
            let _ = tx.apply(&mut self.projected);
        }
        match tx {
            AnyTx::Identity(t) => self.identity_pending.push(Pending { seq, tx: t.clone() }),
            AnyTx::Library(t) => self.library_pending.push(Pending { seq, tx: t.clone() }),
        }
        if !last {
            self.rebuild_projection();
        }
    }

    fn push_identity(&mut self, tx: IdentityTransaction) {
        self.push(AnyTx::Identity(&tx));
    }

    fn push_library(&mut self, tx: LibraryTransaction) {
        self.push(AnyTx::Library(&tx));
    }

    /// Queues a transaction without any checks; block formation validates it.
    pub fn submit_identity(&mut self, tx: IdentityTransaction) {
        self.push_identity(tx);
    }

    pub fn submit_library(&mut self, tx: LibraryTransaction) {
        self.push_library(tx);
    }

    pub fn claim_ownership(&mut self, keypair: &Keypair, name: &str) -> Result<IdentityTransaction, LedgerError> {
        let ts = self.next_timestamp();
        self.claim_ownership_at(keypair, name, ts)
    }

    pub fn claim_ownership_at(
        &mut self,
        keypair: &Keypair,
        name: &str,
        timestamp: u64,
    ) -> Result<IdentityTransaction, LedgerError> {
        let name = LibraryName::new(name)?;
        let tx = IdentityTransaction::claim(keypair, timestamp, name);
        self.check_projected(AnyTx::Identity(&tx))?;
        self.push_identity(tx.clone());
        Ok(tx)
    }

    pub fn transfer_ownership(
        &mut self,
        current: &Keypair,
        new_owner: PublicKey,
        name: &str,
    ) -> Result<IdentityTransaction, LedgerError> {
        let ts = self.next_timestamp();
        self.transfer_ownership_at(current, new_owner, name, ts)
    }

    pub fn transfer_ownership_at(
        &mut self,
        current: &Keypair,
        new_owner: PublicKey,
        name: &str,
        timestamp: u64,
    ) -> Result<IdentityTransaction, LedgerError> {
        let name = LibraryName::new(name)?;
        let head = self
            .projected
            .head(&name)
            .ok_or_else(|| LedgerError::UnknownLibrary(name.to_string()))?;
        if head.owner != current.public_key() {
            return Err(LedgerError::NotOwner(name.to_string()));
        }
        let tx = IdentityTransaction::transfer(current, timestamp, new_owner, name, head.transaction.id);
        self.check_projected(AnyTx::Identity(&tx))?;
        self.push_identity(tx.clone());
        Ok(tx)
    }

    pub fn register_library(
        &mut self,
        owner: &Keypair,
        name: &str,
        version: &str,
        artifact_hash: Hash256,
    ) -> Result<LibraryTransaction, LedgerError> {
        let ts = self.next_timestamp();
        self.register_library_at(owner, name, version, artifact_hash, ts)
    }

    pub fn register_library_at(
        &mut self,
        owner: &Keypair,
        name: &str,
        version: &str,
        artifact_hash: Hash256,
        timestamp: u64,
    ) -> Result<LibraryTransaction, LedgerError> {
        let name = LibraryName::new(name)?;
        let version = PackedVersion::parse(version)?;
        let tx = LibraryTransaction::signed(owner, timestamp, name, version, artifact_hash);
        self.check_projected(AnyTx::Library(&tx))?;
        self.push_library(tx.clone());
        Ok(tx)
    }

    // ---- block formation --------------------------------------------------

    /// Seals the pending transactions of one chain.
    pub fn form_block(&mut self, chain: ChainKind) -> Result<SealOutcome, LedgerError> {
        self.seal(&[chain])
    }

    /// Seals both chains in one round, validating all pending transactions in
    /// a single timestamp order.
    pub fn seal_all(&mut self) -> Result<SealOutcome, LedgerError> {
        self.seal(&[ChainKind::Identity, ChainKind::Library])
    }

    fn seal(&mut self, chains: &[ChainKind]) -> Result<SealOutcome, LedgerError> {
        let wants = |c| chains.contains(&c);
        let empty = (!wants(ChainKind::Identity) || self.identity_pending.is_empty())
            && (!wants(ChainKind::Library) || self.library_pending.is_empty());
        if empty {
            let names: Vec<String> = chains.iter().map(ToString::to_string).collect();
            return Err(LedgerError::EmptyPending(names.join("+")));
        }
        let mut working = self.sealed.clone();
        let mut id_ok = Vec::new();
        let mut lib_ok = Vec::new();
        let mut rejected = Vec::new();
        for (_, tx) in self.merged_pending() {
            let chain = match tx {
                AnyTx::Identity(_) => ChainKind::Identity,
                AnyTx::Library(_) => ChainKind::Library,
            };
            if !wants(chain) {
                continue;
            }
            match tx.apply(&mut working) {
                Ok(()) => match tx {
                    AnyTx::Identity(t) => id_ok.push(t.clone()),
                    AnyTx::Library(t) => lib_ok.push(t.clone()),
                },
                Err(reason) => rejected.push(TxRejection {
                    chain,
                    tx_id: tx.id(),
                    reason,
                }),
            }
        }
        let accepted = id_ok.len() + lib_ok.len();
        let mut blocks = Vec::new();
        if !id_ok.is_empty() {
            let block = Block::seal(self.identity.last().map(|b| &b.header), id_ok);
            blocks.push(summary(ChainKind::Identity, &block.header));
            self.identity.push(block);
        }
        if !lib_ok.is_empty() {
            let block = Block::seal(self.library.last().map(|b| &b.header), lib_ok);
            blocks.push(summary(ChainKind::Library, &block.header));
            self.library.push(block);
        }
        if wants(ChainKind::Identity) {
            self.identity_pending.clear();
        }
        if wants(ChainKind::Library) {
            self.library_pending.clear();
        }
        self.sealed = working;
        self.rebuild_projection();
        let confirmed_at = blocks
            .iter()
            .map(|b| b.timestamp)
            .max()
            .map(|ts| ts.saturating_add(self.config.confirmation_delay_ms));
        Ok(SealOutcome {
            blocks,
            accepted,
            rejected,
            confirmed_at,
        })
    }

    // ---- queries (sealed state only) ---------------------------------------

    pub fn owner_at(&self, name: &str, timestamp: u64) -> Option<PublicKey> {
        let name = LibraryName::new(name).ok()?;
        self.sealed.owner_at(&name, timestamp).map(|r| r.owner)
    }

    pub fn current_owner(&self, name: &str) -> Option<PublicKey> {
        let name = LibraryName::new(name).ok()?;
        self.sealed.head(&name).map(|r| r.owner)
    }

    pub fn ownership_history(&self, name: &str) -> Vec<OwnershipRecord> {
        LibraryName::new(name)
            .map(|n| self.sealed.history(&n).to_vec())
            .unwrap_or_default()
    }

    pub fn claimed_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.sealed.names().map(|n| n.to_string()).collect();
        names.sort();
        names
    }

    pub fn library_record_count(&self) -> usize {
        self.sealed.library_len()
    }

    /// Fetches a library record and proves it: the record's own signature,
    /// then ownership of the name at the moment the record was made.
    pub fn query_and_verify(&self, name: &str, version: &str) -> Result<VerifiedEntry, LedgerError> {
        let lib_name = LibraryName::new(name)?;
        let packed = PackedVersion::parse(version)?;
        let tx = self
            .sealed
            .library(&lib_name, packed)
            .ok_or_else(|| LedgerError::NotFound {
                name: name.to_string(),
                version: version.to_string(),
            })?;
        tx.check_integrity().map_err(|error| LedgerError::BadSignature {
            what: "library record",
            error,
        })?;
        let mismatch = || LedgerError::OwnershipMismatch {
            name: name.to_string(),
            version: version.to_string(),
        };
        let rec = self.sealed.owner_at(&lib_name, tx.timestamp).ok_or_else(mismatch)?;
        if rec.owner != tx.owner_pubkey {
            return Err(mismatch());
        }
        rec.transaction.check_integrity().map_err(|error| LedgerError::BadSignature {
            what: "ownership transaction",
            error,
        })?;
        Ok(VerifiedEntry {
            transaction: tx.clone(),
            proof: OwnerProof {
                owner: rec.owner,
                ownership_tx_id: rec.transaction.id,
                owned_since: rec.since,
            },
        })
    }

    pub fn identity_blocks(&self) -> &[Block<IdentityTransaction>] {
        &self.identity
    }

    pub fn library_blocks(&self) -> &[Block<LibraryTransaction>] {
        &self.library
    }

    pub fn pending_identity(&self) -> impl Iterator<Item = &IdentityTransaction> {
        self.identity_pending.iter().map(|p| &p.tx)
    }

    pub fn pending_library(&self) -> impl Iterator<Item = &LibraryTransaction> {
        self.library_pending.iter().map(|p| &p.tx)
    }

    /// Re-verifies both chains from their encoded bytes.
    pub fn audit(&self) -> AuditReport {
        audit_bytes(&encode_chain(&self.identity), &encode_chain(&self.library))
    }

    pub(crate) fn from_parts(
        config: LedgerConfig,
        identity: Vec<Block<IdentityTransaction>>,
        library: Vec<Block<LibraryTransaction>>,
        sealed: LedgerState,
    ) -> Self {
        let mut ledger = DualLedger::new(config);
        let latest = identity
            .iter()
            .map(|b| b.header.timestamp)
            .chain(library.iter().map(|b| b.header.timestamp))
            .max()
            .unwrap_or(0);
        ledger.identity = identity;
        ledger.library = library;
        ledger.projected = sealed.clone();
        ledger.sealed = sealed;
        ledger.latest_ts = latest;
        ledger
    }
}

fn summary(chain: ChainKind, header: &BlockHeader) -> SealedBlock {
    SealedBlock {
        chain,
        height: header.height,
        timestamp: header.timestamp,
        tx_count: header.tx_count,
        hash: header.hash(),
    }
}

impl ReferenceProvider for DualLedger {
    /// Names and versions that cannot be encoded cannot be on the ledger.
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        if LibraryName::new(&coords.name).is_err() || PackedVersion::parse(&coords.version).is_err() {
            return Ok(Vec::new());
        }
        match self.query_and_verify(&coords.name, &coords.version) {
            Ok(entry) => Ok(vec![RegistryRecord {
                ecosystem: coords.ecosystem,
                name: coords.name.clone(),
                version: coords.version.clone(),
                artifact_filename: None,
                artifact_hash: entry.transaction.artifact_hash,
            }]),
            Err(LedgerError::NotFound { .. }) => Ok(Vec::new()),
            Err(e) => Err(RegistryError::Untrustworthy {
                coords: coords.to_string(),
                reason: e.to_string(),
            }),
        }
    }
}

/// Many readers, one writer: the handle clients share.
#[derive(Debug, Clone, Default)]
pub struct SharedLedger(Arc<RwLock<DualLedger>>);

impl SharedLedger {
    pub fn new(ledger: DualLedger) -> Self {
        SharedLedger(Arc::new(RwLock::new(ledger)))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, DualLedger> {
        self.0.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, DualLedger> {
        self.0.write().unwrap_or_else(|e| e.into_inner())
    }
}

impl ReferenceProvider for SharedLedger {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        self.read().records(coords)
    }
}
