//! Reference-hash providers: where verifiers look up the official hash of a
//! library version.

mod index;
mod local;
mod server;

pub(crate) use index::encode_segment as index_encode;
pub use index::{parse_index_release_json, parse_release_document, IndexClient, REGISTRY_URL_ENV};
pub use local::{LocalRegistry, ARCHIVES_DIR, REGISTRY_FILE};
pub use server::{serve_local, LocalIndexServer};

use serde::{Deserialize, Serialize};

use crate::ecosystem::{Ecosystem, PackageCoords};
use crate::hash::Hash256;

/// One published artifact of a library version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryRecord {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    /// Absent for sources that track a single hash per version, like the ledger.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_filename: Option<String>,
    pub artifact_hash: Hash256,
}

impl RegistryRecord {
    pub fn coords(&self) -> PackageCoords {
        PackageCoords::new(self.ecosystem, &self.name, &self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("{0} is not in the registry")]
    NotFound(String),
    /// Network or I/O trouble. Never reported as absence.
    #[error("registry unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("{coords} has several artifacts ({}); a file name is required", filenames.join(", "))]
    AmbiguousArtifact {
        coords: String,
        filenames: Vec<String>,
    },
    #[error("record {0} already exists")]
    DuplicateRecord(String),
    #[error("release document rejected: {0}")]
    SchemaError(String),
    #[error("{filename} is not part of the {coords} release")]
    FilenameNotInRelease { coords: String, filename: String },
    /// The provider holds a record but it failed its own integrity checks.
    #[error("record for {coords} failed integrity checks: {reason}")]
    Untrustworthy { coords: String, reason: String },
}

/// Anything that can answer "which artifacts and hashes were published for
/// this version". An empty answer means the version is unknown.
pub trait ReferenceProvider: Send + Sync {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError>;
}

impl<P: ReferenceProvider + ?Sized> ReferenceProvider for &P {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        (**self).records(coords)
    }
}

impl<P: ReferenceProvider + ?Sized> ReferenceProvider for std::sync::Arc<P> {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        (**self).records(coords)
    }
}

/// Resolves one reference record, narrowing by artifact file name when given.
pub fn lookup_reference_hash(
    provider: &(impl ReferenceProvider + ?Sized),
    coords: &PackageCoords,
    filename: Option<&str>,
) -> Result<RegistryRecord, RegistryError> {
    let mut records = provider.records(coords)?;
    if let Some(filename) = filename {
        records.retain(|r| r.artifact_filename.as_deref().is_none_or(|f| f == filename));
    }
    match records.len() {
        0 => Err(RegistryError::NotFound(coords.to_string())),
        1 => Ok(records.pop().unwrap()),
        _ => Err(RegistryError::AmbiguousArtifact {
            coords: coords.to_string(),
            filenames: records
                .iter()
                .map(|r| r.artifact_filename.clone().unwrap_or_default())
                .collect(),
        }),
    }
}

/// Name equality as the ecosystem defines it. Python names are
/// case-insensitive and treat runs of `-`, `_` and `.` alike.
pub(crate) fn names_equal(ecosystem: Ecosystem, a: &str, b: &str) -> bool {
    match ecosystem {
        Ecosystem::Python => normalize_python(a) == normalize_python(b),
        _ => a == b,
    }
}

fn normalize_python(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut sep = false;
    for c in name.chars() {
        if matches!(c, '-' | '_' | '.') {
            sep = true;
        } else {
            if sep && !out.is_empty() {
                out.push('-');
            }
            sep = false;
            out.push(c.to_ascii_lowercase());
        }
    }
    out
}

/// Picks the artifact to pin when a version has several. Python prefers the
/// wheel, the file the installer actually fetches.
pub(crate) fn preferred_artifact<T>(
    ecosystem: Ecosystem,
    candidates: &[T],
    filename: impl Fn(&T) -> &str,
) -> Result<&T, Vec<String>> {
    match candidates {
        [only] => Ok(only),
        _ => {
            let names = || candidates.iter().map(|c| filename(c).to_string()).collect();
            if ecosystem == Ecosystem::Python {
                let wheels: Vec<&T> = candidates.iter().filter(|c| filename(c).ends_with(".whl")).collect();
                if let [wheel] = wheels.as_slice() {
                    return Ok(wheel);
                }
            }
            Err(names())
        }
    }
}
