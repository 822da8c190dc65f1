//! Ed25519 keys and signatures with fixed 32/64-byte encodings.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SECRET_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("secret key must be {SECRET_KEY_LEN} bytes, got {0}")]
    SecretKeyLength(usize),
    #[error("public key must be {PUBLIC_KEY_LEN} bytes, got {0}")]
    PublicKeyLength(usize),
    #[error("key material is not valid hex")]
    InvalidHex,
    #[error("secret key does not match the recorded public key")]
    Mismatch,
    #[error("malformed key file: {0}")]
    KeyFile(String),
}

/// Raw 32-byte Ed25519 public key. Never validated on construction so that
/// hostile bytes from disk can be carried and rejected at verification time.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey([u8; PUBLIC_KEY_LEN]);

impl PublicKey {
    pub const fn from_bytes(bytes: [u8; PUBLIC_KEY_LEN]) -> Self {
        PublicKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; PUBLIC_KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, KeyError> {
        let bytes = hex::decode(s.trim()).map_err(|_| KeyError::InvalidHex)?;
        let arr: [u8; PUBLIC_KEY_LEN] = bytes
            .as_slice()
            .try_into()
            .map_err(|_| KeyError::PublicKeyLength(bytes.len()))?;
        Ok(PublicKey(arr))
    }

    /// Strict Ed25519 verification. Unparseable keys verify nothing.
    pub fn verify(&self, message: &[u8], signature: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        key.verify_strict(message, &sig).is_ok()
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", self.to_hex())
    }
}

impl fmt::Display for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for PublicKey {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PublicKey::from_hex(s)
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PublicKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub const fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> Self {
        Signature(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SIGNATURE_LEN] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(self.0))
    }
}

/// An Ed25519 signing key together with its public half.
#[derive(Clone)]
pub struct Keypair {
    signing: SigningKey,
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    scheme: String,
    secret_key: String,
    public_key: String,
}

impl Keypair {
    pub fn generate() -> Self {
        Keypair {
            signing: SigningKey::generate(&mut rand::rngs::OsRng),
        }
    }

    /// Deterministic keypair for tests and fixtures.
    pub fn from_seed(seed: [u8; SECRET_KEY_LEN]) -> Self {
        Keypair {
            signing: SigningKey::from_bytes(&seed),
        }
    }

    pub fn from_secret_bytes(secret: &[u8]) -> Result<Self, KeyError> {
        let seed: [u8; SECRET_KEY_LEN] = secret
            .try_into()
            .map_err(|_| KeyError::SecretKeyLength(secret.len()))?;
        Ok(Self::from_seed(seed))
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn secret_bytes(&self) -> [u8; SECRET_KEY_LEN] {
        self.signing.to_bytes()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }

    pub fn to_json(&self) -> String {
        let file = KeyFile {
            scheme: "ed25519".into(),
            secret_key: hex::encode(self.secret_bytes()),
            public_key: self.public_key().to_hex(),
        };
        serde_json::to_string_pretty(&file).expect("key file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KeyError> {
        let file: KeyFile =
            serde_json::from_str(text).map_err(|e| KeyError::KeyFile(e.to_string()))?;
        if file.scheme != "ed25519" {
            return Err(KeyError::KeyFile(format!(
                "unsupported scheme {:?}",
                file.scheme
            )));
        }
        let secret = hex::decode(file.secret_key.trim()).map_err(|_| KeyError::InvalidHex)?;
        let pair = Keypair::from_secret_bytes(&secret)?;
        if pair.public_key() != PublicKey::from_hex(&file.public_key)? {
            return Err(KeyError::Mismatch);
        }
        Ok(pair)
    }
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair")
            .field("public", &self.public_key())
            .finish_non_exhaustive()
    }
}
