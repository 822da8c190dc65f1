//! Package-index JSON API: release documents of the form
//! `{"info": {...}, "urls": [{"filename", "digests": {"sha256"}, "url"}]}`
//! fetched from `<base>/{name}/{version}/json`.

use std::io::Read;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use super::{names_equal, preferred_artifact, ReferenceProvider, RegistryError, RegistryRecord};
use crate::ecosystem::PackageCoords;
use crate::generator::{ArtifactSource, FetchedArtifact, GeneratorError};
use crate::hash::Hash256;

pub const REGISTRY_URL_ENV: &str = "SBOMGUARD_REGISTRY_URL";

const MAX_BODY: u64 = 256 * 1024 * 1024;

#[derive(Deserialize)]
struct ReleaseDoc {
    #[serde(default)]
    info: Option<ReleaseInfo>,
    urls: Vec<ReleaseUrl>,
}

#[derive(Deserialize)]
struct ReleaseInfo {
    name: Option<String>,
    version: Option<String>,
}

#[derive(Deserialize)]
struct ReleaseUrl {
    filename: String,
    #[serde(default)]
    digests: Digests,
    #[serde(default)]
    url: Option<String>,
}

#[derive(Deserialize, Default)]
struct Digests {
    sha256: Option<String>,
}

/// A release file as published, before any digest is required.
#[derive(Debug, Clone)]
struct ReleaseFile {
    filename: String,
    sha256: Option<Hash256>,
    url: Option<String>,
}

fn parse_files(bytes: &[u8], coords: &PackageCoords) -> Result<Vec<ReleaseFile>, RegistryError> {
    let doc: ReleaseDoc =
        serde_json::from_slice(bytes).map_err(|e| RegistryError::SchemaError(e.to_string()))?;
    if let Some(info) = &doc.info {
        if let Some(name) = &info.name {
            if !names_equal(coords.ecosystem, name, &coords.name) {
                return Err(RegistryError::SchemaError(format!(
                    "document describes {name:?}, expected {:?}",
                    coords.name
                )));
            }
        }
        if let Some(version) = &info.version {
            if *version != coords.version {
                return Err(RegistryError::SchemaError(format!(
                    "document describes version {version:?}, expected {:?}",
                    coords.version
                )));
            }
        }
    }
    doc.urls
        .into_iter()
        .map(|u| {
            let sha256 = u
                .digests
                .sha256
                .map(|hex| {
                    Hash256::from_hex(&hex).map_err(|e| {
                        RegistryError::SchemaError(format!("{}: sha256 digest: {e}", u.filename))
                    })
                })
                .transpose()?;
            Ok(ReleaseFile {
                filename: u.filename,
                sha256,
                url: u.url,
            })
        })
        .collect()
}

fn record(coords: &PackageCoords, filename: String, hash: Hash256) -> RegistryRecord {
    RegistryRecord {
        ecosystem: coords.ecosystem,
        name: coords.name.clone(),
        version: coords.version.clone(),
        artifact_filename: Some(filename),
        artifact_hash: hash,
    }
}

/// Every file of a release that publishes a SHA-256 digest.
pub fn parse_release_document(
    bytes: &[u8],
    coords: &PackageCoords,
) -> Result<Vec<RegistryRecord>, RegistryError> {
    Ok(parse_files(bytes, coords)?
        .into_iter()
        .filter_map(|f| f.sha256.map(|h| record(coords, f.filename, h)))
        .collect())
}

/// The record for `artifact_filename` within a release document.
pub fn parse_index_release_json(
    bytes: &[u8],
    coords: &PackageCoords,
    artifact_filename: &str,
) -> Result<RegistryRecord, RegistryError> {
    let file = parse_files(bytes, coords)?
        .into_iter()
        .find(|f| f.filename == artifact_filename)
        .ok_or_else(|| RegistryError::FilenameNotInRelease {
            coords: coords.to_string(),
            filename: artifact_filename.to_string(),
        })?;
    let hash = file
        .sha256
        .ok_or_else(|| RegistryError::SchemaError(format!("{artifact_filename}: no sha256 digest")))?;
    Ok(record(coords, file.filename, hash))
}

/// Counting gate bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn enter(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub(crate) fn encode_segment(s: &str) -> String {
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

/// HTTP client for an index speaking the release-document format.
///
/// Transport failures and server errors are retried once, then surface as
/// `ProviderUnavailable`. Only a 404 means "not in the registry".
pub struct IndexClient {
    base: String,
    agent: ureq::Agent,
    gate: Gate,
}

impl std::fmt::Debug for IndexClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexClient").field("base", &self.base).finish()
    }
}

impl IndexClient {
    pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;

    pub fn new(base_url: &str) -> Self {
        Self::with_limits(base_url, Self::DEFAULT_MAX_IN_FLIGHT, Duration::from_secs(10))
    }

    pub fn with_limits(base_url: &str, max_in_flight: usize, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(timeout.min(Duration::from_secs(5)))
            .timeout(timeout)
            .build();
        IndexClient {
            base: base_url.trim_end_matches('/').to_string(),
            agent,
            gate: Gate::new(max_in_flight),
        }
    }

    /// Client for the base URL in `SBOMGUARD_REGISTRY_URL`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var(REGISTRY_URL_ENV)
            .ok()
            .filter(|s| !s.is_empty())
            .map(|s| Self::new(&s))
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn release_url(&self, coords: &PackageCoords) -> String {
        format!(
            "{}/{}/{}/json",
            self.base,
            encode_segment(&coords.name),
            encode_segment(&coords.version)
        )
    }

    /// `Ok(None)` on 404.
    fn get(&self, url: &str) -> Result<Option<Vec<u8>>, RegistryError> {
        let _slot = self.gate.enter();
        let mut last = String::new();
        for _attempt in 0..2 {
            match self.agent.get(url).call() {
                Ok(resp) => {
                    let mut body = Vec::new();
                    match resp.into_reader().take(MAX_BODY).read_to_end(&mut body) {
                        Ok(_) => return Ok(Some(body)),
                        Err(e) => last = format!("{url}: reading body: {e}"),
                    }
                }
                Err(ureq::Error::Status(404, _)) => return Ok(None),
                Err(ureq::Error::Status(code, _)) if code >= 500 => last = format!("{url}: HTTP {code}"),
                Err(ureq::Error::Status(code, _)) => {
                    return Err(RegistryError::ProviderUnavailable(format!("{url}: HTTP {code}")))
                }
                Err(ureq::Error::Transport(t)) => last = format!("{url}: {t}"),
            }
        }
        Err(RegistryError::ProviderUnavailable(last))
    }

    fn release(&self, coords: &PackageCoords) -> Result<Option<Vec<ReleaseFile>>, RegistryError> {
        match self.get(&self.release_url(coords))? {
            Some(body) => parse_files(&body, coords).map(Some),
            None => Ok(None),
        }
    }

    fn absolute(&self, url: &str) -> String {
        if url.starts_with("http://") || url.starts_with("https://") {
            url.to_string()
        } else {
            format!("{}/{}", self.base, url.trim_start_matches('/'))
        }
    }
}

impl ReferenceProvider for IndexClient {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        Ok(self
            .release(coords)?
            .unwrap_or_default()
            .into_iter()
            .filter_map(|f| f.sha256.map(|h| record(coords, f.filename, h)))
            .collect())
    }
}

impl ArtifactSource for IndexClient {
    fn fetch(&self, coords: &PackageCoords) -> Result<FetchedArtifact, GeneratorError> {
        let source_err = |e: RegistryError| GeneratorError::Source {
            coords: coords.to_string(),
            message: e.to_string(),
        };
        let not_found = || GeneratorError::ArtifactNotFound {
            name: coords.name.clone(),
            version: coords.version.clone(),
        };
        let files: Vec<ReleaseFile> = self
            .release(coords)
            .map_err(source_err)?
            .ok_or_else(not_found)?
            .into_iter()
            .filter(|f| f.url.is_some())
            .collect();
        if files.is_empty() {
            return Err(not_found());
        }
        let file = preferred_artifact(coords.ecosystem, &files, |f| &f.filename).map_err(|names| {
            GeneratorError::Source {
                coords: coords.to_string(),
                message: format!("ambiguous artifacts: {}", names.join(", ")),
            }
        })?;
        let expected = file.sha256.ok_or_else(|| GeneratorError::HashUnavailable {
            name: coords.name.clone(),
            version: coords.version.clone(),
        })?;
        let url = self.absolute(file.url.as_deref().unwrap());
        let bytes = self.get(&url).map_err(source_err)?.ok_or_else(not_found)?;
        if Hash256::digest(&bytes) != expected {
            return Err(GeneratorError::DownloadIntegrity {
                filename: file.filename.clone(),
            });
        }
        Ok(FetchedArtifact {
            filename: file.filename.clone(),
            bytes,
        })
    }
}
