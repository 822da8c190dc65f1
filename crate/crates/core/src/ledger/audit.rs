//! Offline re-verification of persisted chains.

use std::path::Path;

use serde::Serialize;

use super::block::{body_hash, split_frames, Block, BlockHeader, HEADER_LEN};
use super::persist::{read_optional, IDENTITY_CHAIN_FILE, IDENTITY_PENDING_FILE, LIBRARY_CHAIN_FILE, LIBRARY_PENDING_FILE};
use super::state::{AnyTx, LedgerState};
use super::tx::{IdentityTransaction, LedgerTx, LibraryTransaction};
use super::{ChainKind, LedgerError};
use crate::hash::Hash256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Framing,
    Decode,
    HeightMismatch,
    PrevHashMismatch,
    BodyHashMismatch,
    TimestampMismatch,
    TxIntegrity,
    RuleViolation,
    PendingCorrupt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub chain: ChainKind,
    pub height: Option<u64>,
    pub kind: FindingKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub identity_blocks: usize,
    pub library_blocks: usize,
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Decoded transactions tagged with their block height, for the replay.
struct ChainScan<T> {
    blocks: usize,
    txs: Vec<(u64, T)>,
}

fn scan_chain<T: LedgerTx>(chain: ChainKind, bytes: &[u8], findings: &mut Vec<AuditFinding>) -> ChainScan<T> {
    let mut push = |height, kind, detail: String| findings.push(AuditFinding { chain, height, kind, detail });
    let (frames, framing) = split_frames(bytes);
    let mut prev: Option<BlockHeader> = None;
    let mut txs = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let height = i as u64;
        let block = match Block::<T>::decode(frame) {
            Ok(b) => b,
            Err(e) => {
                push(Some(height), FindingKind::Decode, e.to_string());
                // Keep chaining on the raw header so later blocks are still checked.
                prev = frame
                    .get(..HEADER_LEN)
                    .map(|h| BlockHeader::decode(h.try_into().unwrap()));
                continue;
            }
        };
        let h = &block.header;
        if h.height != height {
            push(Some(height), FindingKind::HeightMismatch, format!("header says {}", h.height));
        }
        let want_prev = prev.as_ref().map_or(Hash256::ZERO, BlockHeader::hash);
        if h.prev_hash != want_prev {
            push(Some(height), FindingKind::PrevHashMismatch, format!("expected {want_prev}"));
        }
        if h.body_hash != body_hash(&block.transactions) {
            push(Some(height), FindingKind::BodyHashMismatch, "body does not match header".into());
        }
        let tx_max = block.transactions.iter().map(LedgerTx::timestamp).max().unwrap_or(0);
        let want_ts = prev.as_ref().map_or(tx_max, |p| p.timestamp.max(tx_max));
        if h.timestamp != want_ts {
            push(Some(height), FindingKind::TimestampMismatch, format!("expected {want_ts}, found {}", h.timestamp));
        }
        for tx in block.transactions {
            match tx.check_integrity() {
                Ok(()) => txs.push((height, tx)),
                Err(e) => push(Some(height), FindingKind::TxIntegrity, format!("{}: {e}", tx.id())),
            }
        }
        prev = Some(block.header);
    }
    if let Some((offset, what)) = framing {
        push(None, FindingKind::Framing, format!("{what} at byte {offset}"));
    }
    ChainScan {
        blocks: frames.len(),
        txs,
    }
}

/// Checks both chains: framing, hash links, body hashes, block timestamps,
/// every transaction's id and signature, and finally a replay of the
/// ownership rules over all intact transactions.
pub fn audit_bytes(identity: &[u8], library: &[u8]) -> AuditReport {
    let mut findings = Vec::new();
    let ids = scan_chain::<IdentityTransaction>(ChainKind::Identity, identity, &mut findings);
    let libs = scan_chain::<LibraryTransaction>(ChainKind::Library, library, &mut findings);
    let mut merged: Vec<(u64, ChainKind, AnyTx<'_>)> = ids
        .txs
        .iter()
        .map(|(h, t)| (*h, ChainKind::Identity, AnyTx::Identity(t)))
        .chain(libs.txs.iter().map(|(h, t)| (*h, ChainKind::Library, AnyTx::Library(t))))
        .collect();
    // Stable sort keeps in-block order for equal keys.
    merged.sort_by_key(|(h, _, tx)| (tx.order_key(), *h));
    let mut state = LedgerState::default();
    for (height, chain, tx) in merged {
        if let Err(reason) = tx.apply(&mut state) {
            findings.push(AuditFinding {
                chain,
                height: Some(height),
                kind: FindingKind::RuleViolation,
                detail: format!("{}: {reason}", tx.id()),
            });
        }
    }
    AuditReport {
        identity_blocks: ids.blocks,
        library_blocks: libs.blocks,
        findings,
    }
}

fn audit_pending<T: LedgerTx>(chain: ChainKind, bytes: &[u8], findings: &mut Vec<AuditFinding>) {
    let rec = 8 + T::LEN;
    if !bytes.len().is_multiple_of(rec) {
        findings.push(AuditFinding {
            chain,
            height: None,
            kind: FindingKind::PendingCorrupt,
            detail: format!("pending file length {} is not a multiple of {rec}", bytes.len()),
        });
        return;
    }
    for chunk in bytes.chunks_exact(rec) {
        let detail = match T::decode(&chunk[8..]) {
            Ok(tx) => match tx.check_integrity() {
                Ok(()) => continue,
                Err(e) => format!("{}: {e}", tx.id()),
            },
            Err(e) => e.to_string(),
        };
        findings.push(AuditFinding {
            chain,
            height: None,
            kind: FindingKind::PendingCorrupt,
            detail,
        });
    }
}

/// Audits a ledger directory, including its pending queues.
pub fn audit_dir(dir: &Path) -> Result<AuditReport, LedgerError> {
    let identity = read_optional(&dir.join(IDENTITY_CHAIN_FILE))?;
    let library = read_optional(&dir.join(LIBRARY_CHAIN_FILE))?;
    let mut report = audit_bytes(&identity, &library);
    let ip = read_optional(&dir.join(IDENTITY_PENDING_FILE))?;
    let lp = read_optional(&dir.join(LIBRARY_PENDING_FILE))?;
    audit_pending::<IdentityTransaction>(ChainKind::Identity, &ip, &mut report.findings);
    audit_pending::<LibraryTransaction>(ChainKind::Library, &lp, &mut report.findings);
    Ok(report)
}
