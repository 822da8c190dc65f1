//! SBOM document model, canonical serialization and detached signatures.
//!
//! The on-disk form is a CycloneDX-flavoured JSON subset. Canonical bytes are
//! compact JSON with object keys sorted by byte order; the signature covers
//! SHA-256 of those bytes and lives in a separate `.sbom.sig` sidecar.

use std::fmt;

use chrono::{DateTime, SecondsFormat, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use crate::crypto::{KeyError, Keypair, PublicKey, Signature, PUBLIC_KEY_LEN, SIGNATURE_LEN};
use crate::ecosystem::Ecosystem;
use crate::hash::Hash256;
use crate::version::{Version, VersionError};

pub const SBOM_EXTENSION: &str = "sbom.json";
pub const SIGNATURE_EXTENSION: &str = "sbom.sig";

const BOM_FORMAT: &str = "CycloneDX";
const SPEC_VERSION: &str = "1.5";
const FILENAME_PROPERTY: &str = "sbomguard:artifact_filename";

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("component name must not be empty")]
    EmptyName,
    #[error(transparent)]
    Version(#[from] VersionError),
    #[error("duplicate component {name}@{version}")]
    DuplicateComponent { name: String, version: String },
    #[error("purl {purl:?} does not match {ecosystem}:{name}@{version}")]
    PurlMismatch {
        purl: String,
        ecosystem: Ecosystem,
        name: String,
        version: String,
    },
    #[error("malformed SBOM: {0}")]
    Malformed(String),
    #[error("signature envelope must be {expected} bytes, got {actual}")]
    EnvelopeLength { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolMode {
    Naive,
    Secure,
}

impl ToolMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolMode::Naive => "naive",
            ToolMode::Secure => "secure",
        }
    }
}

impl fmt::Display for ToolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One dependency as recorded in an SBOM.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Component {
    name: String,
    version: String,
    ecosystem: Ecosystem,
    purl: String,
    artifact_hash: Option<Hash256>,
    artifact_filename: Option<String>,
}

impl Component {
    pub fn new(
        ecosystem: Ecosystem,
        name: impl Into<String>,
        version: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        let version = version.into();
        if name.is_empty() {
            return Err(ModelError::EmptyName);
        }
        Version::parse(&version)?;
        let purl = package_url(ecosystem, &name, &version);
        Ok(Component {
            name,
            version,
            ecosystem,
            purl,
            artifact_hash: None,
            artifact_filename: None,
        })
    }

    pub fn with_artifact(mut self, hash: Hash256, filename: Option<String>) -> Self {
        self.artifact_hash = Some(hash);
        self.artifact_filename = filename;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn ecosystem(&self) -> Ecosystem {
        self.ecosystem
    }

    pub fn purl(&self) -> &str {
        &self.purl
    }

    pub fn artifact_hash(&self) -> Option<Hash256> {
        self.artifact_hash
    }

    pub fn artifact_filename(&self) -> Option<&str> {
        self.artifact_filename.as_deref()
    }

    fn sort_key(&self) -> (&str, &str) {
        (&self.name, &self.version)
    }

    fn to_value(&self) -> Value {
        let mut obj = serde_json::Map::new();
        obj.insert("type".into(), json!("library"));
        obj.insert("name".into(), json!(self.name));
        obj.insert("version".into(), json!(self.version));
        obj.insert("purl".into(), json!(self.purl));
        if let Some(hash) = self.artifact_hash {
            obj.insert(
                "hashes".into(),
                json!([{ "alg": "SHA-256", "content": hash.to_hex() }]),
            );
        }
        if let Some(filename) = &self.artifact_filename {
            obj.insert(
                "properties".into(),
                json!([{ "name": FILENAME_PROPERTY, "value": filename }]),
            );
        }
        Value::Object(obj)
    }
}

/// Builds a package URL (`pkg:type/namespace/name@version`).
pub fn package_url(ecosystem: Ecosystem, name: &str, version: &str) -> String {
    let (namespace, short) = match ecosystem {
        Ecosystem::Java => match name.split_once(':') {
            Some((group, artifact)) => (Some(group), artifact),
            None => (None, name),
        },
        Ecosystem::Javascript | Ecosystem::Php => match name.rsplit_once('/') {
            Some((ns, n)) => (Some(ns), n),
            None => (None, name),
        },
        _ => (None, name),
    };
    let short = if ecosystem == Ecosystem::Python {
        short.to_ascii_lowercase().replace('_', "-")
    } else {
        short.to_string()
    };
    let mut out = format!("pkg:{}/", ecosystem.purl_type());
    if let Some(ns) = namespace {
        out.push_str(&percent_encode(ns));
        out.push('/');
    }
    out.push_str(&percent_encode(&short));
    out.push('@');
    out.push_str(&percent_encode(version));
    out
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'-' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Component inventory. Components are kept sorted by `(name, version)` and
/// unique on that pair; constructors enforce both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbomDocument {
    serial_number: Uuid,
    timestamp: DateTime<Utc>,
    tool_name: String,
    tool_mode: ToolMode,
    components: Vec<Component>,
}

impl SbomDocument {
    pub fn new(
        serial_number: Uuid,
        timestamp: DateTime<Utc>,
        tool_name: impl Into<String>,
        tool_mode: ToolMode,
        mut components: Vec<Component>,
    ) -> Result<Self, ModelError> {
        components.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        if let Some(dup) = components
            .windows(2)
            .find(|w| w[0].sort_key() == w[1].sort_key())
        {
            return Err(ModelError::DuplicateComponent {
                name: dup[0].name.clone(),
                version: dup[0].version.clone(),
            });
        }
        Ok(SbomDocument {
            serial_number,
            // Sub-millisecond precision would not survive a round trip.
            timestamp: timestamp.trunc_subsecs(3),
            tool_name: tool_name.into(),
            tool_mode,
            components,
        })
    }

    pub fn serial_number(&self) -> Uuid {
        self.serial_number
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn tool_name(&self) -> &str {
        &self.tool_name
    }

    pub fn tool_mode(&self) -> ToolMode {
        self.tool_mode
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn to_value(&self) -> Value {
        json!({
            "bomFormat": BOM_FORMAT,
            "specVersion": SPEC_VERSION,
            "serialNumber": format!("urn:uuid:{}", self.serial_number),
            "version": 1,
            "metadata": {
                "timestamp": self.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true),
                "tools": [{ "name": self.tool_name, "mode": self.tool_mode.as_str() }],
            },
            "components": self.components.iter().map(Component::to_value).collect::<Vec<_>>(),
        })
    }

    /// Parses an SBOM file. Unknown fields are rejected so that nothing in the
    /// file escapes the signed canonical form.
    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let raw: RawDocument =
            serde_json::from_slice(bytes).map_err(|e| ModelError::Malformed(e.to_string()))?;
        raw.into_document()
    }
}

/// Deterministic compact JSON with sorted keys.
pub fn canonical_serialize(doc: &SbomDocument) -> Vec<u8> {
    let mut out = Vec::new();
    write_canonical(&doc.to_value(), &mut out);
    out
}

pub fn canonical_digest(doc: &SbomDocument) -> Hash256 {
    Hash256::digest(&canonical_serialize(doc))
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (key, val)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, key).expect("string serializes");
                out.push(b':');
                write_canonical(val, out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        scalar => serde_json::to_writer(&mut *out, scalar).expect("scalar serializes"),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawDocument {
    bom_format: String,
    spec_version: String,
    serial_number: String,
    version: u32,
    metadata: RawMetadata,
    components: Vec<RawComponent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetadata {
    timestamp: String,
    tools: Vec<RawTool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTool {
    name: String,
    mode: ToolMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    #[serde(rename = "type")]
    kind: String,
    name: String,
    version: String,
    purl: String,
    #[serde(default)]
    hashes: Option<Vec<RawHash>>,
    #[serde(default)]
    properties: Option<Vec<RawProperty>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHash {
    alg: String,
    content: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    name: String,
    value: String,
}

impl RawDocument {
    fn into_document(self) -> Result<SbomDocument, ModelError> {
        let malformed = |m: String| ModelError::Malformed(m);
        if self.bom_format != BOM_FORMAT || self.spec_version != SPEC_VERSION || self.version != 1
        {
            return Err(malformed(format!(
                "unsupported format {} {} v{}",
                self.bom_format, self.spec_version, self.version
            )));
        }
        let serial = self
            .serial_number
            .strip_prefix("urn:uuid:")
            .and_then(|s| Uuid::parse_str(s).ok())
            .ok_or_else(|| malformed(format!("bad serialNumber {:?}", self.serial_number)))?;
        // Exact canonical spelling only, so the signed bytes pin the value.
        if format!("urn:uuid:{serial}") != self.serial_number {
            return Err(malformed("serialNumber is not in canonical form".into()));
        }
        let timestamp = DateTime::parse_from_rfc3339(&self.metadata.timestamp)
            .map_err(|e| malformed(format!("bad timestamp: {e}")))?
            .with_timezone(&Utc);
        let [tool] = <[RawTool; 1]>::try_from(self.metadata.tools)
            .map_err(|_| malformed("expected exactly one tool entry".into()))?;

        let mut components = Vec::with_capacity(self.components.len());
        for raw in self.components {
            components.push(raw.into_component()?);
        }
        let doc = SbomDocument::new(serial, timestamp, tool.name, tool.mode, components)?;
        if doc.timestamp.to_rfc3339_opts(SecondsFormat::Millis, true) != self.metadata.timestamp {
            return Err(malformed("timestamp is not in canonical form".into()));
        }
        Ok(doc)
    }
}

impl RawComponent {
    fn into_component(self) -> Result<Component, ModelError> {
        if self.kind != "library" {
            return Err(ModelError::Malformed(format!(
                "unsupported component type {:?}",
                self.kind
            )));
        }
        let ecosystem = self
            .purl
            .strip_prefix("pkg:")
            .and_then(|rest| rest.split_once('/'))
            .and_then(|(ty, _)| Ecosystem::from_purl_type(ty))
            .ok_or_else(|| ModelError::Malformed(format!("unrecognised purl {:?}", self.purl)))?;
        let mut component = Component::new(ecosystem, self.name, self.version)?;
        if component.purl != self.purl {
            return Err(ModelError::PurlMismatch {
                purl: self.purl,
                ecosystem,
                name: component.name,
                version: component.version,
            });
        }
        match self.hashes.as_deref() {
            None => {}
            Some([h]) if h.alg == "SHA-256" => {
                let hash = Hash256::from_hex(&h.content)
                    .map_err(|e| ModelError::Malformed(format!("bad hash: {e}")))?;
                if hash.to_hex() != h.content {
                    return Err(ModelError::Malformed("hash must be lowercase hex".into()));
                }
                component.artifact_hash = Some(hash);
            }
            Some(_) => {
                return Err(ModelError::Malformed(
                    "expected exactly one SHA-256 hash entry".into(),
                ))
            }
        }
        match self.properties.as_deref() {
            None => {}
            Some([p]) if p.name == FILENAME_PROPERTY => {
                component.artifact_filename = Some(p.value.clone());
            }
            Some(_) => return Err(ModelError::Malformed("unsupported component properties".into())),
        }
        Ok(component)
    }
}

pub const SCHEME_ED25519: u8 = 0x01;
pub const ENVELOPE_LEN: usize = 1 + PUBLIC_KEY_LEN + SIGNATURE_LEN;

/// Detached signature: `scheme_id(1) || pubkey(32) || signature(64)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureEnvelope {
    pub scheme_id: u8,
    pub signer_pubkey: PublicKey,
    pub signature: Signature,
}

impl SignatureEnvelope {
    pub fn to_bytes(&self) -> [u8; ENVELOPE_LEN] {
        let mut out = [0u8; ENVELOPE_LEN];
        out[0] = self.scheme_id;
        out[1..33].copy_from_slice(self.signer_pubkey.as_bytes());
        out[33..].copy_from_slice(self.signature.as_bytes());
        out
    }

    /// Length-checked decode. The scheme byte is carried as-is and judged
    /// at verification time.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() != ENVELOPE_LEN {
            return Err(ModelError::EnvelopeLength {
                expected: ENVELOPE_LEN,
                actual: bytes.len(),
            });
        }
        let mut key = [0u8; PUBLIC_KEY_LEN];
        key.copy_from_slice(&bytes[1..33]);
        let mut sig = [0u8; SIGNATURE_LEN];
        sig.copy_from_slice(&bytes[33..]);
        Ok(SignatureEnvelope {
            scheme_id: bytes[0],
            signer_pubkey: PublicKey::from_bytes(key),
            signature: Signature::from_bytes(sig),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureStatus {
    Valid,
    Invalid,
    Absent,
}

pub fn sign_document(doc: &SbomDocument, secret_key: &[u8]) -> Result<SignatureEnvelope, KeyError> {
    Ok(sign_document_with(doc, &Keypair::from_secret_bytes(secret_key)?))
}

pub fn sign_document_with(doc: &SbomDocument, keypair: &Keypair) -> SignatureEnvelope {
    let digest = canonical_digest(doc);
    SignatureEnvelope {
        scheme_id: SCHEME_ED25519,
        signer_pubkey: keypair.public_key(),
        signature: keypair.sign(digest.as_bytes()),
    }
}

/// `Valid` iff the envelope uses the Ed25519 scheme and its signature checks
/// out over the document's canonical digest. Never returns `Absent`.
pub fn verify_document_signature(doc: &SbomDocument, env: &SignatureEnvelope) -> SignatureStatus {
    if env.scheme_id != SCHEME_ED25519 {
        return SignatureStatus::Invalid;
    }
    let digest = canonical_digest(doc);
    if env.signer_pubkey.verify(digest.as_bytes(), &env.signature) {
        SignatureStatus::Valid
    } else {
        SignatureStatus::Invalid
    }
}
