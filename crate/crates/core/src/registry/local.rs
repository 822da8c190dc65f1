use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use super::{names_equal, preferred_artifact, ReferenceProvider, RegistryError, RegistryRecord};
use crate::ecosystem::{Ecosystem, PackageCoords};
use crate::generator::{ArtifactSource, FetchedArtifact, GeneratorError};
use crate::hash::Hash256;

pub const REGISTRY_FILE: &str = "registry.json";
pub const ARCHIVES_DIR: &str = "archives";

type Key = (Ecosystem, String, String);

fn key(ecosystem: Ecosystem, name: &str, version: &str) -> Key {
    let name = match ecosystem {
        // Index by the normalized spelling so lookups are spelling-agnostic.
        Ecosystem::Python => super::normalize_python(name),
        _ => name.to_string(),
    };
    (ecosystem, name, version.to_string())
}

fn unique_id(r: &RegistryRecord) -> String {
    format!(
        "{}:{}@{} [{}]",
        r.ecosystem,
        r.name,
        r.version,
        r.artifact_filename.as_deref().unwrap_or("-")
    )
}

/// File-backed registry: `registry.json` plus an optional `archives/`
/// directory holding the distribution files themselves.
#[derive(Debug, Clone, Default)]
pub struct LocalRegistry {
    file: Option<PathBuf>,
    archives: Option<PathBuf>,
    records: Vec<RegistryRecord>,
    index: HashMap<Key, Vec<usize>>,
}

impl LocalRegistry {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens a registry directory (containing `registry.json`) or the JSON file
    /// itself. A missing file yields an empty registry bound to that path.
    pub fn open(path: &Path) -> Result<Self, RegistryError> {
        let (file, base) = if path.is_dir() {
            (path.join(REGISTRY_FILE), path.to_path_buf())
        } else {
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (path.to_path_buf(), base)
        };
        let records: Vec<RegistryRecord> = match fs::read(&file) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| RegistryError::SchemaError(format!("{}: {e}", file.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => {
                return Err(RegistryError::ProviderUnavailable(format!("{}: {e}", file.display())))
            }
        };
        let archives = base.join(ARCHIVES_DIR);
        let mut reg = LocalRegistry {
            file: Some(file),
            archives: archives.is_dir().then_some(archives),
            ..Self::default()
        };
        reg.import_records(records)?;
        Ok(reg)
    }

    pub fn from_records(records: Vec<RegistryRecord>) -> Result<Self, RegistryError> {
        let mut reg = Self::in_memory();
        reg.import_records(records)?;
        Ok(reg)
    }

    pub fn all_records(&self) -> &[RegistryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn archives_dir(&self) -> Option<&Path> {
        self.archives.as_deref()
    }

    /// Adds records all-or-nothing. A record duplicating an existing
    /// `(ecosystem, name, version, filename)` rejects the whole batch.
    pub fn import_records(
        &mut self,
        records: impl IntoIterator<Item = RegistryRecord>,
    ) -> Result<(), RegistryError> {
        let records: Vec<RegistryRecord> = records.into_iter().collect();
        let mut seen: HashSet<(Key, Option<String>)> = HashSet::new();
        for r in &records {
            let k = key(r.ecosystem, &r.name, &r.version);
            let exists = self.index.get(&k).is_some_and(|ids| {
                ids.iter()
                    .any(|&i| self.records[i].artifact_filename == r.artifact_filename)
            });
            if exists || !seen.insert((k, r.artifact_filename.clone())) {
                return Err(RegistryError::DuplicateRecord(unique_id(r)));
            }
        }
        for r in records {
            let k = key(r.ecosystem, &r.name, &r.version);
            self.index.entry(k).or_default().push(self.records.len());
            self.records.push(r);
        }
        Ok(())
    }

    /// Writes `registry.json` back to where it was opened from.
    pub fn save(&self) -> Result<(), RegistryError> {
        let file = self
            .file
            .as_ref()
            .ok_or_else(|| RegistryError::ProviderUnavailable("in-memory registry has no file".into()))?;
        self.save_to(file)
    }

    pub fn save_to(&self, file: &Path) -> Result<(), RegistryError> {
        let json = serde_json::to_vec_pretty(&self.records).expect("records serialize");
        let tmp = file.with_extension("json.tmp");
        fs::write(&tmp, json)
            .and_then(|_| fs::rename(&tmp, file))
            .map_err(|e| RegistryError::ProviderUnavailable(format!("{}: {e}", file.display())))
    }

    fn lookup(&self, coords: &PackageCoords) -> Vec<&RegistryRecord> {
        self.index
            .get(&key(coords.ecosystem, &coords.name, &coords.version))
            .map(|ids| ids.iter().map(|&i| &self.records[i]).collect())
            .unwrap_or_default()
    }
}

impl ReferenceProvider for LocalRegistry {
    fn records(&self, coords: &PackageCoords) -> Result<Vec<RegistryRecord>, RegistryError> {
        Ok(self
            .lookup(coords)
            .into_iter()
            .filter(|r| names_equal(coords.ecosystem, &r.name, &coords.name))
            .cloned()
            .collect())
    }
}

impl ArtifactSource for LocalRegistry {
    /// Reads the archive from `archives/` and checks it against the record.
    fn fetch(&self, coords: &PackageCoords) -> Result<FetchedArtifact, GeneratorError> {
        let not_found = || GeneratorError::ArtifactNotFound {
            name: coords.name.clone(),
            version: coords.version.clone(),
        };
        let candidates: Vec<&RegistryRecord> = self
            .lookup(coords)
            .into_iter()
            .filter(|r| r.artifact_filename.is_some())
            .collect();
        if candidates.is_empty() {
            return Err(not_found());
        }
        let record = preferred_artifact(coords.ecosystem, &candidates, |r| {
            r.artifact_filename.as_deref().unwrap()
        })
        .map_err(|names| GeneratorError::Source {
            coords: coords.to_string(),
            message: format!("ambiguous artifacts: {}", names.join(", ")),
        })?;
        let filename = record.artifact_filename.clone().unwrap();
        let dir = self.archives.as_ref().ok_or_else(not_found)?;
        if filename.contains(['/', '\\']) || filename == ".." {
            return Err(not_found());
        }
        let bytes = match fs::read(dir.join(&filename)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => {
                return Err(GeneratorError::Source {
                    coords: coords.to_string(),
                    message: e.to_string(),
                })
            }
        };
        if Hash256::digest(&bytes) != record.artifact_hash {
            return Err(GeneratorError::DownloadIntegrity { filename });
        }
        Ok(FetchedArtifact { filename, bytes })
    }
}
