//! Hash-chained blocks and their persisted form.
//!
//! Header (84 bytes): `prev_hash 32 | height 8 | timestamp 8 | tx_count 4 | body_hash 32`.
//! A chain file is a sequence of `u32 length | header | transactions` frames.

use serde::Serialize;

use super::tx::{CodecError, LedgerTx};
use crate::hash::Hash256;

pub const HEADER_LEN: usize = 84;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockHeader {
    pub prev_hash: Hash256,
    pub height: u64,
    pub timestamp: u64,
    pub tx_count: u32,
    pub body_hash: Hash256,
}

impl BlockHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..32].copy_from_slice(self.prev_hash.as_bytes());
        out[32..40].copy_from_slice(&self.height.to_be_bytes());
        out[40..48].copy_from_slice(&self.timestamp.to_be_bytes());
        out[48..52].copy_from_slice(&self.tx_count.to_be_bytes());
        out[52..84].copy_from_slice(self.body_hash.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8; HEADER_LEN]) -> Self {
        BlockHeader {
            prev_hash: Hash256::from_bytes(bytes[0..32].try_into().unwrap()),
            height: u64::from_be_bytes(bytes[32..40].try_into().unwrap()),
            timestamp: u64::from_be_bytes(bytes[40..48].try_into().unwrap()),
            tx_count: u32::from_be_bytes(bytes[48..52].try_into().unwrap()),
            body_hash: Hash256::from_bytes(bytes[52..84].try_into().unwrap()),
        }
    }

    /// The value the next block stores as `prev_hash`.
    pub fn hash(&self) -> Hash256 {
        Hash256::digest(&self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block<T> {
    pub header: BlockHeader,
    pub transactions: Vec<T>,
}

pub fn body_hash<T: LedgerTx>(txs: &[T]) -> Hash256 {
    let mut body = Vec::with_capacity(txs.len() * T::LEN);
    for tx in txs {
        tx.encode_into(&mut body);
    }
    Hash256::digest(&body)
}

impl<T: LedgerTx> Block<T> {
    /// Seals `transactions` on top of `prev` (None for genesis). The block
    /// timestamp is the latest of the parent's and the transactions'.
    pub fn seal(prev: Option<&BlockHeader>, transactions: Vec<T>) -> Self {
        let tx_max = transactions.iter().map(LedgerTx::timestamp).max().unwrap_or(0);
        let header = BlockHeader {
            prev_hash: prev.map_or(Hash256::ZERO, BlockHeader::hash),
            height: prev.map_or(0, |p| p.height + 1),
            timestamp: prev.map_or(tx_max, |p| p.timestamp.max(tx_max)),
            tx_count: u32::try_from(transactions.len()).expect("block size fits u32"),
            body_hash: body_hash(&transactions),
        };
        Block { header, transactions }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.transactions.len() * T::LEN);
        out.extend_from_slice(&self.header.encode());
        for tx in &self.transactions {
            tx.encode_into(&mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < HEADER_LEN || !(bytes.len() - HEADER_LEN).is_multiple_of(T::LEN) {
            return Err(CodecError::Malformed("block length is not header plus whole transactions"));
        }
        let header = BlockHeader::decode(bytes[..HEADER_LEN].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        if body.len() / T::LEN != header.tx_count as usize {
            return Err(CodecError::Malformed("tx_count disagrees with block length"));
        }
        let transactions = body.chunks_exact(T::LEN).map(T::decode).collect::<Result<_, _>>()?;
        Ok(Block { header, transactions })
    }
}

pub fn encode_chain<T: LedgerTx>(blocks: &[Block<T>]) -> Vec<u8> {
    let mut out = Vec::new();
    for block in blocks {
        let bytes = block.encode();
        out.extend_from_slice(&u32::try_from(bytes.len()).expect("block fits u32").to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

/// Splits a chain file into frames. Stops at the first framing error and
/// reports the byte offset where it occurred.
pub fn split_frames(bytes: &[u8]) -> (Vec<&[u8]>, Option<(usize, &'static str)>) {
    let mut frames = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let Some(len) = bytes.get(at..at + 4) else {
            return (frames, Some((at, "truncated length prefix")));
        };
        let len = u32::from_be_bytes(len.try_into().unwrap()) as usize;
        let Some(frame) = bytes.get(at + 4..at + 4 + len) else {
            return (frames, Some((at, "frame extends past end of file")));
        };
        frames.push(frame);
        at += 4 + len;
    }
    (frames, None)
}
