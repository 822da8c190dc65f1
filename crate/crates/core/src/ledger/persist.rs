//! On-disk layout: one framed chain file per ledger plus a pending queue each.
//! Pending records are `seq u64 | transaction bytes`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::audit::{audit_dir, AuditReport};
use super::block::{split_frames, Block};
use super::state::{AnyTx, LedgerState};
use super::tx::{IdentityTransaction, LedgerTx, LibraryTransaction};
use super::{encode_chain, DualLedger, LedgerConfig, LedgerError};

pub const IDENTITY_CHAIN_FILE: &str = "identity.chain";
pub const LIBRARY_CHAIN_FILE: &str = "library.chain";
pub const IDENTITY_PENDING_FILE: &str = "identity.pending";
pub const LIBRARY_PENDING_FILE: &str = "library.pending";
/// Default ledger directory for the command-line tool.
pub const LEDGER_DIR_ENV: &str = "SBOMGUARD_LEDGER_DIR";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LedgerError + '_ {
    move |source| LedgerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Missing files read as empty.
pub(crate) fn read_optional(path: &Path) -> Result<Vec<u8>, LedgerError> {
    match fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LedgerError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn encode_pending<T: LedgerTx>(items: impl Iterator<Item = (u64, T)>) -> Vec<u8> {
    let mut out = Vec::new();
    for (seq, tx) in items {
        out.extend_from_slice(&seq.to_be_bytes());
        tx.encode_into(&mut out);
    }
    out
}

fn decode_pending<T: LedgerTx>(bytes: &[u8]) -> Vec<(u64, T)> {
    let rec = 8 + T::LEN;
    if !bytes.len().is_multiple_of(rec) {
        return Vec::new();
    }
    bytes
        .chunks_exact(rec)
        .filter_map(|c| {
            let seq = u64::from_be_bytes(c[..8].try_into().unwrap());
            T::decode(&c[8..]).ok().map(|tx| (seq, tx))
        })
        .collect()
}

fn decode_chain<T: LedgerTx>(bytes: &[u8]) -> Vec<Block<T>> {
    let (frames, _) = split_frames(bytes);
    frames.into_iter().filter_map(|f| Block::decode(f).ok()).collect()
}

impl DualLedger {
    pub fn save(&self, dir: &Path) -> Result<(), LedgerError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_atomic(&dir.join(IDENTITY_CHAIN_FILE), &encode_chain(self.identity_blocks()))?;
        write_atomic(&dir.join(LIBRARY_CHAIN_FILE), &encode_chain(self.library_blocks()))?;
        let ip = encode_pending(self.identity_pending.iter().map(|p| (p.seq, p.tx.clone())));
        let lp = encode_pending(self.library_pending.iter().map(|p| (p.seq, p.tx.clone())));
        write_atomic(&dir.join(IDENTITY_PENDING_FILE), &ip)?;
        write_atomic(&dir.join(LIBRARY_PENDING_FILE), &lp)
    }

    /// Loads a ledger directory after a full audit. A directory that does not
    /// exist yet yields an empty ledger.
    pub fn open(dir: &Path, config: LedgerConfig) -> Result<DualLedger, LedgerError> {
        let report = audit_dir(dir)?;
        if !report.ok() {
            return Err(LedgerError::Corrupt(report));
        }
        Ok(Self::load_unchecked(dir, config)?.0)
    }

    /// Loads whatever decodes, without enforcing the rules, and returns the
    /// audit alongside. For inspecting damaged ledgers.
    pub fn load_unchecked(dir: &Path, config: LedgerConfig) -> Result<(DualLedger, AuditReport), LedgerError> {
        let report = audit_dir(dir)?;
        let identity: Vec<Block<IdentityTransaction>> = decode_chain(&read_optional(&dir.join(IDENTITY_CHAIN_FILE))?);
        let library: Vec<Block<LibraryTransaction>> = decode_chain(&read_optional(&dir.join(LIBRARY_CHAIN_FILE))?);
        let mut merged: Vec<AnyTx<'_>> = identity
            .iter()
            .flat_map(|b| b.transactions.iter().map(AnyTx::Identity))
            .chain(library.iter().flat_map(|b| b.transactions.iter().map(AnyTx::Library)))
            .collect();
        merged.sort_by_key(AnyTx::order_key);
        let mut state = LedgerState::default();
        for tx in merged {
            match tx {
                AnyTx::Identity(t) => state.record_identity(t),
                AnyTx::Library(t) => state.record_library(t),
            }
        }
        let mut ledger = DualLedger::from_parts(config, identity, library, state);
        let ip = decode_pending::<IdentityTransaction>(&read_optional(&dir.join(IDENTITY_PENDING_FILE))?);
        let lp = decode_pending::<LibraryTransaction>(&read_optional(&dir.join(LIBRARY_PENDING_FILE))?);
        let mut queued: Vec<(u64, Result<IdentityTransaction, LibraryTransaction>)> = ip
            .into_iter()
            .map(|(s, t)| (s, Ok(t)))
            .chain(lp.into_iter().map(|(s, t)| (s, Err(t))))
            .collect();
        queued.sort_by_key(|(s, _)| *s);
        for (_, tx) in queued {
            match tx {
                Ok(t) => ledger.submit_identity(t),
                Err(t) => ledger.submit_library(t),
            }
        }
        Ok((ledger, report))
    }
}
