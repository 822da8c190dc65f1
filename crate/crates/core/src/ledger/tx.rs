//! Fixed-width transaction codecs. All integers are big-endian.
//!
//! Identity transaction, 296 bytes:
//! `id 32 | timestamp 8 | input_pubkey 32 | output_pubkey 32 | content 128 | signature 64`
//! with content `op 1 | library_name 32 | prev_tx_id 32 | reserved 63`.
//!
//! Library transaction, 208 bytes:
//! `id 32 | timestamp 8 | owner_pubkey 32 | library_name 32 | version 8 | artifact_hash 32 | signature 64`
//! with version `major u16 | minor u16 | patch u16 | reserved u16`.
//!
//! `id` is SHA-256 over every field between it and the signature; the
//! signature is made over `id`.

use std::fmt;

use serde::Serialize;

use crate::crypto::{Keypair, PublicKey, Signature, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use crate::hash::Hash256;
use crate::version::Version;

pub const IDENTITY_TX_LEN: usize = 296;
pub const LIBRARY_TX_LEN: usize = 208;
pub const CONTENT_LEN: usize = 128;
pub const NAME_LEN: usize = 32;
pub const VERSION_LEN: usize = 8;
const RESERVED_LEN: usize = CONTENT_LEN - 1 - NAME_LEN - 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("library name is {0} bytes; at most {NAME_LEN} fit")]
    NameTooLong(usize),
    #[error("invalid library name: {0}")]
    InvalidName(&'static str),
    #[error("version {input:?} does not fit the packed layout: {reason}")]
    Width { input: String, reason: &'static str },
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("malformed field: {0}")]
    Malformed(&'static str),
}

/// UTF-8 name of at most 32 bytes, zero-padded on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct LibraryName(String);

impl LibraryName {
    pub fn new(name: &str) -> Result<Self, CodecError> {
        if name.is_empty() {
            return Err(CodecError::InvalidName("empty"));
        }
        if name.len() > NAME_LEN {
            return Err(CodecError::NameTooLong(name.len()));
        }
        if name.contains('\0') {
            return Err(CodecError::InvalidName("contains NUL"));
        }
        Ok(LibraryName(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn to_bytes(&self) -> [u8; NAME_LEN] {
        let mut out = [0u8; NAME_LEN];
        out[..self.0.len()].copy_from_slice(self.0.as_bytes());
        out
    }

    /// Rejects non-zero bytes after the terminator so every name has exactly
    /// one encoding.
    pub fn from_bytes(bytes: &[u8; NAME_LEN]) -> Result<Self, CodecError> {
        let end = bytes.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        if bytes[end..].iter().any(|&b| b != 0) {
            return Err(CodecError::InvalidName("non-zero padding"));
        }
        let name = std::str::from_utf8(&bytes[..end]).map_err(|_| CodecError::InvalidName("not UTF-8"))?;
        LibraryName::new(name)
    }
}

impl fmt::Display for LibraryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Three 16-bit numeric fields. Suffixed or oversized versions do not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedVersion {
    pub major: u16,
    pub minor: u16,
    pub patch: u16,
}

impl PackedVersion {
    pub const fn new(major: u16, minor: u16, patch: u16) -> Self {
        PackedVersion { major, minor, patch }
    }

    pub fn parse(input: &str) -> Result<Self, CodecError> {
        let width = |reason| CodecError::Width {
            input: input.to_string(),
            reason,
        };
        let v = Version::parse(input).map_err(|e| width(e.reason))?;
        if v.suffix().is_some() {
            return Err(width("suffixes cannot be packed"));
        }
        let mut parts = [0u16; 3];
        for (slot, &n) in parts.iter_mut().zip(v.numbers()) {
            *slot = u16::try_from(n).map_err(|_| width("component exceeds 65535"))?;
        }
        Ok(PackedVersion::new(parts[0], parts[1], parts[2]))
    }

    pub fn to_bytes(self) -> [u8; VERSION_LEN] {
        let mut out = [0u8; VERSION_LEN];
        out[0..2].copy_from_slice(&self.major.to_be_bytes());
        out[2..4].copy_from_slice(&self.minor.to_be_bytes());
        out[4..6].copy_from_slice(&self.patch.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; VERSION_LEN]) -> Result<Self, CodecError> {
        if bytes[6..8] != [0, 0] {
            return Err(CodecError::Malformed("version reserved field is not zero"));
        }
        let be = |i: usize| u16::from_be_bytes([bytes[i], bytes[i + 1]]);
        Ok(PackedVersion::new(be(0), be(2), be(4)))
    }
}

impl fmt::Display for PackedVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

impl Serialize for PackedVersion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityOp {
    Claim,
    Transfer,
}

impl IdentityOp {
    fn code(self) -> u8 {
        match self {
            IdentityOp::Claim => 0x01,
            IdentityOp::Transfer => 0x02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdentityContent {
    pub op: IdentityOp,
    pub library_name: LibraryName,
    /// Zero for claims; the current ownership transaction for transfers.
    pub prev_tx_id: Hash256,
}

impl IdentityContent {
    pub fn to_bytes(&self) -> [u8; CONTENT_LEN] {
        let mut out = [0u8; CONTENT_LEN];
        out[0] = self.op.code();
        out[1..33].copy_from_slice(&self.library_name.to_bytes());
        out[33..65].copy_from_slice(self.prev_tx_id.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; CONTENT_LEN]) -> Result<Self, CodecError> {
        let op = match bytes[0] {
            0x01 => IdentityOp::Claim,
            0x02 => IdentityOp::Transfer,
            _ => return Err(CodecError::Malformed("unknown identity operation")),
        };
        if bytes[65..].iter().any(|&b| b != 0) {
            return Err(CodecError::Malformed("content reserved bytes are not zero"));
        }
        debug_assert_eq!(bytes[65..].len(), RESERVED_LEN);
        Ok(IdentityContent {
            op,
            library_name: LibraryName::from_bytes(bytes[1..33].try_into().unwrap())?,
            prev_tx_id: Hash256::from_bytes(bytes[33..65].try_into().unwrap()),
        })
    }
}

/// Why a transaction's own bytes cannot be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum IntegrityError {
    #[error("id does not match the transaction fields")]
    IdMismatch,
    #[error("signature does not verify")]
    BadSignature,
}

fn check(id: Hash256, computed: Hash256, key: &PublicKey, sig: &Signature) -> Result<(), IntegrityError> {
    if id != computed {
        return Err(IntegrityError::IdMismatch);
    }
    if !key.verify(id.as_bytes(), sig) {
        return Err(IntegrityError::BadSignature);
    }
    Ok(())
}

fn take<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().unwrap()
}

/// Common surface of the two transaction kinds.
pub trait LedgerTx: Clone + fmt::Debug + Send + Sync + 'static {
    const LEN: usize;
    fn id(&self) -> Hash256;
    fn timestamp(&self) -> u64;
    fn encode_into(&self, out: &mut Vec<u8>);
    fn decode(bytes: &[u8]) -> Result<Self, CodecError>;
    fn check_integrity(&self) -> Result<(), IntegrityError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdentityTransaction {
    pub id: Hash256,
    pub timestamp: u64,
    pub input_pubkey: PublicKey,
    pub output_pubkey: PublicKey,
    pub content: IdentityContent,
    pub signature: Signature,
}

impl IdentityTransaction {
    /// Builds and signs with `signer`, whose key becomes `input_pubkey`.
    pub fn signed(signer: &Keypair, timestamp: u64, output: PublicKey, content: IdentityContent) -> Self {
        let input = signer.public_key();
        let id = Self::compute_id_of(timestamp, &input, &output, &content);
        IdentityTransaction {
            id,
            timestamp,
            input_pubkey: input,
            output_pubkey: output,
            content,
            signature: signer.sign(id.as_bytes()),
        }
    }

    pub fn claim(signer: &Keypair, timestamp: u64, name: LibraryName) -> Self {
        let content = IdentityContent {
            op: IdentityOp::Claim,
            library_name: name,
            prev_tx_id: Hash256::ZERO,
        };
        Self::signed(signer, timestamp, signer.public_key(), content)
    }

    pub fn transfer(signer: &Keypair, timestamp: u64, to: PublicKey, name: LibraryName, prev: Hash256) -> Self {
        let content = IdentityContent {
            op: IdentityOp::Transfer,
            library_name: name,
            prev_tx_id: prev,
        };
        Self::signed(signer, timestamp, to, content)
    }

    fn compute_id_of(ts: u64, input: &PublicKey, output: &PublicKey, content: &IdentityContent) -> Hash256 {
        Hash256::digest_parts([
            &ts.to_be_bytes()[..],
            input.as_bytes(),
            output.as_bytes(),
            &content.to_bytes(),
        ])
    }

    pub fn compute_id(&self) -> Hash256 {
        Self::compute_id_of(self.timestamp, &self.input_pubkey, &self.output_pubkey, &self.content)
    }

    pub fn library_name(&self) -> &LibraryName {
        &self.content.library_name
    }

    pub fn encode(&self) -> [u8; IDENTITY_TX_LEN] {
        let mut v = Vec::with_capacity(IDENTITY_TX_LEN);
        self.encode_into(&mut v);
        v.try_into().expect("fixed width")
    }
}

impl LedgerTx for IdentityTransaction {
    const LEN: usize = IDENTITY_TX_LEN;

    fn id(&self) -> Hash256 {
        self.id
    }

    fn timestamp(&self) -> u64 {
        self.timestamp
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.id.as_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(self.input_pubkey.as_bytes());
        out.extend_from_slice(self.output_pubkey.as_bytes());
        out.extend_from_slice(&self.content.to_bytes());
        out.extend_from_slice(self.signature.as_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != IDENTITY_TX_LEN {
            return Err(CodecError::Length {
                expected: IDENTITY_TX_LEN,
                actual: bytes.len(),
            });
        }
        Ok(IdentityTransaction {
            id: Hash256::from_bytes(take(bytes, 0)),
            timestamp: u64::from_be_bytes(take(bytes, 32)),
            input_pubkey: PublicKey::from_bytes(take::<PUBLIC_KEY_LEN>(bytes, 40)),
            output_pubkey: PublicKey::from_bytes(take::<PUBLIC_KEY_LEN>(bytes, 72)),
            content: IdentityContent::from_bytes(&take(bytes, 104))?,
            signature: Signature::from_bytes(take::<SIGNATURE_LEN>(bytes, 232)),
        })
    }

    fn check_integrity(&self) -> Result<(), IntegrityError> {
        check(self.id, self.compute_id(), &self.input_pubkey, &self.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LibraryTransaction {
    pub id: Hash256,
    pub timestamp: u64,
    pub owner_pubkey: PublicKey,
    pub library_name: LibraryName,
    pub version: PackedVersion,
    pub artifact_hash: Hash256,
    pub signature: Signature,
}

impl LibraryTransaction {
    pub fn signed(
        owner: &Keypair,
        timestamp: u64,
        library_name: LibraryName,
        version: PackedVersion,
        artifact_hash: Hash256,
    ) -> Self {
        let mut tx = LibraryTransaction {
            id: Hash256::ZERO,
            timestamp,
            owner_pubkey: owner.public_key(),
            library_name,
            version,
            artifact_hash,
            signature: Signature::from_bytes([0; SIGNATURE_LEN]),
        };
        tx.id = tx.compute_id();
        tx.signature = owner.sign(tx.id.as_bytes());
        tx
    }

    pub fn compute_id(&self) -> Hash256 {
        Hash256::digest_parts([
            &self.timestamp.to_be_bytes()[..],
            self.owner_pubkey.as_bytes(),
            &self.library_name.to_bytes(),
            &self.version.to_bytes(),
            self.artifact_hash.as_bytes(),
        ])
    }

    pub fn encode(&self) -> [u8; LIBRARY_TX_LEN] {
        let mut v = Vec::with_capacity(LIBRARY_TX_LEN);
        self.encode_into(&mut v);
        v.try_into().expect("fixed width")
    }
}

impl LedgerTx for LibraryTransaction {
    const LEN: usize = LIBRARY_TX_LEN;

    fn id(&self) -> Hash256 {
        self.id
    }

    fn timestamp(&self) -> u64 {
        self.timestamp
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(self.id.as_bytes());
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(self.owner_pubkey.as_bytes());
        out.extend_from_slice(&self.library_name.to_bytes());
        out.extend_from_slice(&self.version.to_bytes());
        out.extend_from_slice(self.artifact_hash.as_bytes());
        out.extend_from_slice(self.signature.as_bytes());
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != LIBRARY_TX_LEN {
            return Err(CodecError::Length {
                expected: LIBRARY_TX_LEN,
                actual: bytes.len(),
            });
        }
        Ok(LibraryTransaction {
            id: Hash256::from_bytes(take(bytes, 0)),
            timestamp: u64::from_be_bytes(take(bytes, 32)),
            owner_pubkey: PublicKey::from_bytes(take::<PUBLIC_KEY_LEN>(bytes, 40)),
            library_name: LibraryName::from_bytes(&take(bytes, 72))?,
            version: PackedVersion::from_bytes(&take(bytes, 104))?,
            artifact_hash: Hash256::from_bytes(take(bytes, 112)),
            signature: Signature::from_bytes(take::<SIGNATURE_LEN>(bytes, 144)),
        })
    }

    fn check_integrity(&self) -> Result<(), IntegrityError> {
        check(self.id, self.compute_id(), &self.owner_pubkey, &self.signature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_and_round_trip() {
        let a = Keypair::from_seed([7; 32]);
        let b = Keypair::from_seed([8; 32]);
        let name = LibraryName::new("poco-demo").unwrap();
        let claim = IdentityTransaction::claim(&a, 1_700_000_000_000, name.clone());
        let bytes = claim.encode();
        assert_eq!(bytes.len(), IDENTITY_TX_LEN);
        assert_eq!(IdentityTransaction::decode(&bytes).unwrap(), claim);
        let xfer = IdentityTransaction::transfer(&a, 1, b.public_key(), name.clone(), claim.id);
        assert_eq!(IdentityTransaction::decode(&xfer.encode()).unwrap(), xfer);
        let lib = LibraryTransaction::signed(&a, 2, name, PackedVersion::parse("1.9").unwrap(), Hash256::digest(b"x"));
        let bytes = lib.encode();
        assert_eq!(bytes.len(), LIBRARY_TX_LEN);
        assert_eq!(LibraryTransaction::decode(&bytes).unwrap(), lib);
        assert!(lib.check_integrity().is_ok());
    }

    #[test]
    fn field_offsets() {
        let a = Keypair::from_seed([7; 32]);
        let lib = LibraryTransaction::signed(
            &a,
            0x0102030405060708,
            LibraryName::new("ab").unwrap(),
            PackedVersion::new(1, 13, 2),
            Hash256::ZERO,
        );
        let b = lib.encode();
        assert_eq!(&b[32..40], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(&b[40..72], a.public_key().as_bytes());
        assert_eq!(&b[72..75], b"ab\0");
        assert_eq!(&b[104..112], &[0, 1, 0, 13, 0, 2, 0, 0]);
        assert_eq!(&b[0..32], Hash256::digest(&b[32..144]).as_bytes());
    }

    #[test]
    fn name_limits() {
        assert!(LibraryName::new(&"x".repeat(32)).is_ok());
        assert_eq!(LibraryName::new(&"x".repeat(33)), Err(CodecError::NameTooLong(33)));
        assert!(LibraryName::new("").is_err());
        let mut raw = [0u8; 32];
        raw[0] = b'a';
        raw[5] = b'b';
        assert!(LibraryName::from_bytes(&raw).is_err());
    }

    #[test]
    fn version_packing() {
        assert_eq!(PackedVersion::parse("1.9").unwrap(), PackedVersion::new(1, 9, 0));
        assert_eq!(PackedVersion::parse("65535.0.1").unwrap(), PackedVersion::new(65535, 0, 1));
        assert!(PackedVersion::parse("65536").is_err());
        assert!(PackedVersion::parse("1.0-beta").is_err());
        assert!(PackedVersion::from_bytes(&[0, 1, 0, 0, 0, 0, 0, 1]).is_err());
    }

    #[test]
    fn tampering_detected() {
        let a = Keypair::from_seed([7; 32]);
        let mut tx = IdentityTransaction::claim(&a, 5, LibraryName::new("l").unwrap());
        tx.timestamp += 1;
        assert_eq!(tx.check_integrity(), Err(IntegrityError::IdMismatch));
        tx.timestamp -= 1;
        tx.id = tx.compute_id();
        let mut sig = *tx.signature.as_bytes();
        sig[0] ^= 1;
        tx.signature = Signature::from_bytes(sig);
        assert_eq!(tx.check_integrity(), Err(IntegrityError::BadSignature));
    }
}
