//! SBOM generation in two modes.
//!
//! Naive mode copies manifest versions verbatim and carries no hashes, which
//! is how the attacked tools behave. Secure mode reads the pinned archive of
//! every dependency from the project's artifact store and records its SHA-256,
//! re-hashing from disk each time so post-pin edits are caught.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::ecosystem::{Ecosystem, PackageCoords};
use crate::hash::Hash256;
use crate::manifest::ManifestProject;
use crate::model::{Component, ModelError, SbomDocument, ToolMode};

pub const PINNED_DIR: &str = ".pinned";
pub const PINS_FILE: &str = "pins.json";
pub const DEFAULT_TOOL_NAME: &str = "sbomguard";

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("no artifact for {name}@{version} in the source")]
    ArtifactNotFound { name: String, version: String },
    #[error("source publishes no SHA-256 for {name}@{version}")]
    HashUnavailable { name: String, version: String },
    #[error("downloaded {filename} does not match its published digest")]
    DownloadIntegrity { filename: String },
    #[error("artifact source failed for {coords}: {message}")]
    Source { coords: String, message: String },
    #[error("artifact store has no archive for {name}@{version}")]
    MissingArtifact { name: String, version: String },
    #[error("pinned archive for {name} changed on disk since pinning")]
    StoreTampered { name: String },
    #[error("artifact store {} is already pinned and immutable", .0.display())]
    StoreAlreadyPinned(PathBuf),
    #[error("project has no artifact store at {}", .0.display())]
    StoreNotPinned(PathBuf),
    #[error("malformed {}: {message}", path.display())]
    Index { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeneratorError + '_ {
    move |source| GeneratorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An archive exactly as distributed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedArtifact {
    pub filename: String,
    pub bytes: Vec<u8>,
}

/// Where pinning obtains archives.
pub trait ArtifactSource: Sync {
    fn fetch(&self, coords: &PackageCoords) -> Result<FetchedArtifact, GeneratorError>;
}

/// Map-backed source for tests and synthetic fixtures.
#[derive(Debug, Default, Clone)]
pub struct InMemorySource {
    artifacts: BTreeMap<(Ecosystem, String, String), FetchedArtifact>,
}

impl InMemorySource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, coords: &PackageCoords, filename: impl Into<String>, bytes: Vec<u8>) {
        self.artifacts.insert(
            (coords.ecosystem, coords.name.clone(), coords.version.clone()),
            FetchedArtifact {
                filename: filename.into(),
                bytes,
            },
        );
    }
}

impl ArtifactSource for InMemorySource {
    fn fetch(&self, coords: &PackageCoords) -> Result<FetchedArtifact, GeneratorError> {
        self.artifacts
            .get(&(coords.ecosystem, coords.name.clone(), coords.version.clone()))
            .cloned()
            .ok_or_else(|| GeneratorError::ArtifactNotFound {
                name: coords.name.clone(),
                version: coords.version.clone(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinEntry {
    pub name: String,
    pub version: String,
    /// File name inside the store.
    pub filename: String,
    /// Distribution file name the archive was published under.
    pub source_filename: String,
    pub sha256: Hash256,
}

/// Pinned archives under `<project>/.pinned`, one per dependency name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactStore {
    root: PathBuf,
    entries: Vec<PinEntry>,
}

impl ArtifactStore {
    /// Loads the store of a pinned project.
    pub fn open(project_root: &Path) -> Result<Self, GeneratorError> {
        let root = project_root.join(PINNED_DIR);
        let index = root.join(PINS_FILE);
        let bytes = match fs::read(&index) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(GeneratorError::StoreNotPinned(root))
            }
            Err(e) => return Err(io_err(&index)(e)),
        };
        let mut entries: Vec<PinEntry> =
            serde_json::from_slice(&bytes).map_err(|e| GeneratorError::Index {
                path: index.clone(),
                message: e.to_string(),
            })?;
        entries.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = entries.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(GeneratorError::Index {
                path: index,
                message: format!("{} pinned twice", w[0].name),
            });
        }
        for e in &entries {
            if !is_plain_file_name(&e.filename) {
                return Err(GeneratorError::Index {
                    path: index,
                    message: format!("illegal stored file name {:?}", e.filename),
                });
            }
        }
        Ok(ArtifactStore { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Entries sorted by dependency name.
    pub fn entries(&self) -> &[PinEntry] {
        &self.entries
    }

    pub fn entry(&self, name: &str) -> Option<&PinEntry> {
        self.entries
            .binary_search_by(|e| e.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn archive_path(&self, entry: &PinEntry) -> PathBuf {
        self.root.join(&entry.filename)
    }

    /// Names whose archive no longer hashes to the recorded digest.
    pub fn tampered(&self) -> Result<Vec<String>, GeneratorError> {
        let hashes: Vec<_> = self
            .entries
            .par_iter()
            .map(|e| {
                let path = self.archive_path(e);
                Hash256::of_file(&path).map_err(io_err(&path)).map(|h| (e, h))
            })
            .collect::<Result<_, _>>()?;
        Ok(hashes
            .into_iter()
            .filter(|(e, h)| *h != e.sha256)
            .map(|(e, _)| e.name.clone())
            .collect())
    }
}

fn is_plain_file_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\'])
        && name != PINS_FILE
}

fn sanitize(name: &str) -> String {
    let mapped: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
        .collect();
    mapped.trim_start_matches(['-', '.']).to_string()
}

fn extension(filename: &str) -> &str {
    if filename.ends_with(".tar.gz") {
        return "tar.gz";
    }
    match filename.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() && !ext.is_empty() => ext,
        _ => "bin",
    }
}

/// On-disk store name for a dependency: `<name>-<version>.<ext>`.
pub fn stored_file_name(name: &str, version: &str, source_filename: &str) -> String {
    format!("{}-{}.{}", sanitize(name), version, extension(source_filename))
}

#[cfg(unix)]
fn make_read_only(path: &Path) -> std::io::Result<()> {
    let mut perms = fs::metadata(path)?.permissions();
    perms.set_readonly(true);
    fs::set_permissions(path, perms)
}

#[cfg(not(unix))]
fn make_read_only(_path: &Path) -> std::io::Result<()> {
    Ok(())
}

/// Downloads every dependency's archive into `<project>/.pinned` and records
/// its SHA-256 as distributed. Refuses to overwrite an existing store.
pub fn pin_artifacts<S: ArtifactSource + ?Sized>(
    project: &ManifestProject,
    source: &S,
) -> Result<ArtifactStore, GeneratorError> {
    let root = project.root().join(PINNED_DIR);
    if root.join(PINS_FILE).exists() {
        return Err(GeneratorError::StoreAlreadyPinned(root));
    }
    let eco = project.ecosystem();
    let fetched: Vec<(PinEntry, Vec<u8>)> = project
        .deps()
        .par_iter()
        .map(|dep| {
            let coords = PackageCoords::new(eco, &dep.name, &dep.version);
            let artifact = source.fetch(&coords)?;
            let entry = PinEntry {
                name: dep.name.clone(),
                version: dep.version.clone(),
                filename: stored_file_name(&dep.name, &dep.version, &artifact.filename),
                source_filename: artifact.filename,
                sha256: Hash256::digest(&artifact.bytes),
            };
            Ok((entry, artifact.bytes))
        })
        .collect::<Result<_, GeneratorError>>()?;

    fs::create_dir_all(&root).map_err(io_err(&root))?;
    let mut entries = Vec::with_capacity(fetched.len());
    for (entry, bytes) in fetched {
        let path = root.join(&entry.filename);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        make_read_only(&path).map_err(io_err(&path))?;
        entries.push(entry);
    }
    let index = root.join(PINS_FILE);
    let json = serde_json::to_vec_pretty(&entries).expect("pin entries serialize");
    fs::write(&index, json).map_err(io_err(&index))?;
    make_read_only(&index).map_err(io_err(&index))?;
    Ok(ArtifactStore { root, entries })
}

/// Timestamp, serial and tool name stamped into generated documents.
/// Unset fields default to the wall clock and a random UUID.
#[derive(Debug, Clone)]
pub struct GenerationOptions {
    pub timestamp: Option<DateTime<Utc>>,
    pub serial: Option<Uuid>,
    pub tool_name: String,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        GenerationOptions {
            timestamp: None,
            serial: None,
            tool_name: DEFAULT_TOOL_NAME.to_string(),
        }
    }
}

impl GenerationOptions {
    pub fn fixed(timestamp: DateTime<Utc>, serial: Uuid) -> Self {
        GenerationOptions {
            timestamp: Some(timestamp),
            serial: Some(serial),
            ..Self::default()
        }
    }

    fn document(&self, mode: ToolMode, components: Vec<Component>) -> Result<SbomDocument, ModelError> {
        SbomDocument::new(
            self.serial.unwrap_or_else(Uuid::new_v4),
            self.timestamp.unwrap_or_else(Utc::now),
            &self.tool_name,
            mode,
            components,
        )
    }
}

/// Trusts the manifests: one hash-less component per declared dependency.
pub fn generate_naive(
    project: &ManifestProject,
    options: &GenerationOptions,
) -> Result<SbomDocument, GeneratorError> {
    let components = project
        .deps()
        .iter()
        .map(|d| Component::new(project.ecosystem(), &d.name, &d.version))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(options.document(ToolMode::Naive, components)?)
}

/// Hashes each dependency's pinned archive as it exists on disk now.
///
/// The archive is located by dependency name only. Versions come from the
/// manifests, so a manifest edited after pinning yields a component whose
/// version and hash disagree, which is exactly what verification detects.
pub fn generate_secure(
    project: &ManifestProject,
    store: &ArtifactStore,
    options: &GenerationOptions,
) -> Result<SbomDocument, GeneratorError> {
    let components = project
        .deps()
        .par_iter()
        .map(|dep| {
            let entry = store.entry(&dep.name).ok_or_else(|| GeneratorError::MissingArtifact {
                name: dep.name.clone(),
                version: dep.version.clone(),
            })?;
            let path = store.archive_path(entry);
            let hash = match Hash256::of_file(&path) {
                Ok(h) => h,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(GeneratorError::MissingArtifact {
                        name: dep.name.clone(),
                        version: dep.version.clone(),
                    })
                }
                Err(e) => return Err(io_err(&path)(e)),
            };
            if hash != entry.sha256 {
                return Err(GeneratorError::StoreTampered {
                    name: dep.name.clone(),
                });
            }
            Ok(Component::new(project.ecosystem(), &dep.name, &dep.version)?
                .with_artifact(hash, Some(entry.source_filename.clone())))
        })
        .collect::<Result<Vec<_>, GeneratorError>>()?;
    Ok(options.document(ToolMode::Secure, components)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stored_names() {
        assert_eq!(stored_file_name("poco-demo", "1.9", "poco-demo-1.9.tgz"), "poco-demo-1.9.tgz");
        assert_eq!(stored_file_name("requests", "2.31.0", "requests-2.31.0.tar.gz"), "requests-2.31.0.tar.gz");
        assert_eq!(stored_file_name("@scope/pkg", "1.0.0", "pkg-1.0.0.tgz"), "scope-pkg-1.0.0.tgz");
        assert_eq!(stored_file_name("g:a", "1", "noext"), "g-a-1.bin");
    }

    #[test]
    fn plain_names_only() {
        assert!(is_plain_file_name("a-1.tgz"));
        for bad in ["", "..", "../x", "a/b", PINS_FILE] {
            assert!(!is_plain_file_name(bad));
        }
    }
}
