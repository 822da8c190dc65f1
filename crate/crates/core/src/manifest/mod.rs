//! Per-ecosystem dependency manifests: parsing, byte-preserving version
//! rewrites (the tampering attack) and the tamperability table.
//!
//! Adapters are text/JSON rewriters. Every scanned version string carries
//! its byte span, so a rewrite touches nothing but version substrings.

mod cargo;
mod composer;
mod conan;
pub(crate) mod jsonspan;
mod maven;
mod npm;
mod nuget;
mod python;

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ecosystem::Ecosystem;
use crate::version::{Version, VersionError};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("missing manifest {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dependency {0:?} is not declared in this project")]
    UnknownDependency(String),
    #[error("{0} projects re-resolve versions from the central repository; tampering is not possible")]
    UnsupportedEcosystem(Ecosystem),
    #[error(transparent)]
    InvalidVersion(#[from] VersionError),
    #[error("dependency {name:?} does not appear in any file selected by scope {scope:?}")]
    NotInScope { name: String, scope: TamperScope },
    #[error("could not recognise the ecosystem of {}", .0.display())]
    UndetectedEcosystem(PathBuf),
}

/// How authoritative a file is when declarations disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileRole {
    Manifest,
    Lock,
    Installed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperScope {
    ManifestOnly,
    ManifestAndLock,
    AllLocations,
}

impl TamperScope {
    fn covers(self, role: FileRole) -> bool {
        match self {
            TamperScope::ManifestOnly => role == FileRole::Manifest,
            TamperScope::ManifestAndLock => role != FileRole::Installed,
            TamperScope::AllLocations => true,
        }
    }
}

impl std::str::FromStr for TamperScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "manifest_only" => Ok(TamperScope::ManifestOnly),
            "manifest_and_lock" => Ok(TamperScope::ManifestAndLock),
            "all_locations" | "all" => Ok(TamperScope::AllLocations),
            other => Err(format!("unknown tamper scope {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DependencySpec {
    pub name: String,
    pub version: String,
    pub source_file: PathBuf,
}

/// Two files declare different versions of the same dependency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionConflict {
    pub name: String,
    pub declarations: Vec<(PathBuf, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestFile {
    /// Relative to the project root.
    pub path: PathBuf,
    pub role: FileRole,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VersionForm {
    Declared,
    /// Auxiliary spelling kept in sync on rewrite but not a declaration.
    ComposerNormalized,
}

#[derive(Debug, Clone)]
pub(crate) struct Occurrence {
    pub name: String,
    pub version: String,
    pub span: Range<usize>,
    pub form: VersionForm,
    #[cfg_attr(not(test), allow(dead_code))]
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ScanError {
    pub line: usize,
    pub message: String,
}

pub(crate) fn syntax(e: jsonspan::SyntaxError) -> ScanError {
    ScanError {
        line: e.line,
        message: e.message,
    }
}

impl Occurrence {
    pub(crate) fn new(
        name: &str,
        version: &str,
        span: Range<usize>,
        form: VersionForm,
        line: usize,
    ) -> Result<Self, ScanError> {
        Version::parse(version).map_err(|e| ScanError {
            line,
            message: format!("{name}: {e}"),
        })?;
        Ok(Occurrence {
            name: name.to_string(),
            version: version.to_string(),
            span,
            form,
            line,
        })
    }

    /// Version from a JSON string, allowing one leading operator from `ops`.
    pub(crate) fn from_json(
        name: &str,
        node: &jsonspan::StrNode,
        ops: &[&str],
    ) -> Result<Self, ScanError> {
        if !node.verbatim {
            return Err(ScanError {
                line: node.line,
                message: format!("{name}: escaped version strings are not supported"),
            });
        }
        let skip = ops
            .iter()
            .find(|op| node.value.starts_with(*op))
            .map_or(0, |op| op.len());
        let version = &node.value[skip..];
        Occurrence::new(
            name,
            version,
            node.span.start + skip..node.span.end,
            VersionForm::Declared,
            node.line,
        )
    }

    pub(crate) fn from_json_unchecked(
        name: &str,
        node: &jsonspan::StrNode,
    ) -> Result<Self, ScanError> {
        if !node.verbatim {
            return Err(ScanError {
                line: node.line,
                message: format!("{name}: escaped version strings are not supported"),
            });
        }
        Ok(Occurrence {
            name: name.to_string(),
            version: node.value.clone(),
            span: node.span.clone(),
            form: VersionForm::Declared,
            line: node.line,
        })
    }
}

fn scan_file(ecosystem: Ecosystem, file: &ManifestFile) -> Result<Vec<Occurrence>, ManifestError> {
    let parse_err = |e: ScanError| ManifestError::Parse {
        file: file.path.clone(),
        line: e.line,
        message: e.message,
    };
    let text = || {
        std::str::from_utf8(&file.bytes).map_err(|_| ManifestError::Parse {
            file: file.path.clone(),
            line: 1,
            message: "file is not valid UTF-8".into(),
        })
    };
    let file_name = file
        .path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default();
    let result = match (ecosystem, file_name) {
        (Ecosystem::Python, _) => python::scan(text()?),
        (Ecosystem::CCpp, "conanfile.py") => conan::scan_py(text()?),
        (Ecosystem::CCpp, _) => conan::scan_txt(text()?),
        (Ecosystem::Csharp, _) => nuget::scan(text()?),
        (Ecosystem::Javascript, "package-lock.json") => npm::scan_lock(&file.bytes),
        (Ecosystem::Javascript, _) if file.role == FileRole::Installed => {
            npm::scan_installed(&file.bytes)
        }
        (Ecosystem::Javascript, _) => npm::scan_package_json(&file.bytes),
        (Ecosystem::Php, "composer.json") => composer::scan_manifest(&file.bytes),
        (Ecosystem::Php, "composer.lock") => composer::scan_lock(&file.bytes),
        (Ecosystem::Php, _) => composer::scan_installed(&file.bytes),
        (Ecosystem::Java, _) => maven::scan(text()?),
        (Ecosystem::Rust, _) => cargo::scan(text()?),
    };
    result.map_err(parse_err)
}

/// A parsed project: its manifest file images plus the dependency set they
/// declare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestProject {
    root: PathBuf,
    ecosystem: Ecosystem,
    files: Vec<ManifestFile>,
    deps: Vec<DependencySpec>,
    conflicts: Vec<VersionConflict>,
    artifact_store: Option<PathBuf>,
}

impl ManifestProject {
    /// Builds a project from in-memory file images.
    pub fn from_files(
        root: impl Into<PathBuf>,
        ecosystem: Ecosystem,
        files: Vec<ManifestFile>,
    ) -> Result<Self, ManifestError> {
        let root = root.into();
        // name -> declarations as (role, file index, version)
        let mut seen: BTreeMap<String, Vec<(FileRole, usize, String)>> = BTreeMap::new();
        for (idx, file) in files.iter().enumerate() {
            for occ in scan_file(ecosystem, file)? {
                if occ.form == VersionForm::Declared {
                    seen.entry(occ.name).or_default().push((file.role, idx, occ.version));
                }
            }
        }
        let mut deps = Vec::with_capacity(seen.len());
        let mut conflicts = Vec::new();
        for (name, decls) in seen {
            // Most authoritative role wins; first declaration breaks ties.
            let top = decls.iter().map(|d| d.0).max().expect("at least one declaration");
            let (_, idx, version) = decls.iter().find(|d| d.0 == top).unwrap();
            let mut distinct: Vec<(PathBuf, String)> = Vec::new();
            for (_, i, v) in &decls {
                let entry = (files[*i].path.clone(), v.clone());
                if !distinct.contains(&entry) {
                    distinct.push(entry);
                }
            }
            if distinct.iter().any(|(_, v)| v != version) {
                conflicts.push(VersionConflict {
                    name: name.clone(),
                    declarations: distinct,
                });
            }
            deps.push(DependencySpec {
                name,
                version: version.clone(),
                source_file: files[*idx].path.clone(),
            });
        }
        let store = root.join(crate::generator::PINNED_DIR);
        let artifact_store = store.is_dir().then_some(store);
        Ok(ManifestProject {
            root,
            ecosystem,
            files,
            deps,
            conflicts,
            artifact_store,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ecosystem(&self) -> Ecosystem {
        self.ecosystem
    }

    pub fn manifest_files(&self) -> &[ManifestFile] {
        &self.files
    }

    /// Declared dependencies, sorted by name.
    pub fn deps(&self) -> &[DependencySpec] {
        &self.deps
    }

    pub fn dep(&self, name: &str) -> Option<&DependencySpec> {
        self.deps.iter().find(|d| d.name == name)
    }

    pub fn conflicts(&self) -> &[VersionConflict] {
        &self.conflicts
    }

    pub fn artifact_store(&self) -> Option<&Path> {
        self.artifact_store.as_deref()
    }

    /// Writes every manifest file image back under the project root.
    pub fn write_files(&self) -> Result<(), ManifestError> {
        for file in &self.files {
            let path = self.root.join(&file.path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|source| ManifestError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            fs::write(&path, &file.bytes).map_err(|source| ManifestError::Io { path, source })?;
        }
        Ok(())
    }
}

fn read(root: &Path, rel: &Path, role: FileRole) -> Result<ManifestFile, ManifestError> {
    let path = root.join(rel);
    let bytes = fs::read(&path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => ManifestError::MissingManifest(rel.to_path_buf()),
        _ => ManifestError::Io { path, source },
    })?;
    Ok(ManifestFile {
        path: rel.to_path_buf(),
        role,
        bytes,
    })
}

fn read_optional(root: &Path, rel: &str, role: FileRole) -> Result<Option<ManifestFile>, ManifestError> {
    match read(root, Path::new(rel), role) {
        Ok(f) => Ok(Some(f)),
        Err(ManifestError::MissingManifest(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `node_modules/<name>/package.json` and `node_modules/@scope/<name>/package.json`.
fn installed_node_modules(root: &Path) -> Result<Vec<PathBuf>, ManifestError> {
    let base = root.join("node_modules");
    let mut out = Vec::new();
    if !base.is_dir() {
        return Ok(out);
    }
    let list = |dir: &Path| -> Result<Vec<PathBuf>, ManifestError> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|source| ManifestError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        Ok(entries)
    };
    for entry in list(&base)? {
        let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with('.') {
            continue;
        }
        let candidates = if name.starts_with('@') { list(&entry)? } else { vec![entry] };
        for dir in candidates {
            let manifest = dir.join("package.json");
            if manifest.is_file() {
                out.push(manifest.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    Ok(out)
}

/// Reads the ecosystem's manifest files under `root` and parses them.
pub fn parse_project(root: &Path, ecosystem: Ecosystem) -> Result<ManifestProject, ManifestError> {
    let mut files = Vec::new();
    match ecosystem {
        Ecosystem::Python => files.push(read(root, Path::new("requirements.txt"), FileRole::Manifest)?),
        Ecosystem::Javascript => {
            files.push(read(root, Path::new("package.json"), FileRole::Manifest)?);
            files.push(read(root, Path::new("package-lock.json"), FileRole::Lock)?);
            for rel in installed_node_modules(root)? {
                files.push(read(root, &rel, FileRole::Installed)?);
            }
        }
        Ecosystem::CCpp => {
            files.extend(read_optional(root, "conanfile.txt", FileRole::Manifest)?);
            files.extend(read_optional(root, "conanfile.py", FileRole::Manifest)?);
            if files.is_empty() {
                return Err(ManifestError::MissingManifest("conanfile.txt".into()));
            }
        }
        Ecosystem::Csharp => files.push(read(root, Path::new("packages.config"), FileRole::Manifest)?),
        Ecosystem::Php => {
            files.push(read(root, Path::new("composer.json"), FileRole::Manifest)?);
            files.push(read(root, Path::new("composer.lock"), FileRole::Lock)?);
            files.extend(read_optional(
                root,
                "vendor/composer/installed.json",
                FileRole::Installed,
            )?);
        }
        Ecosystem::Java => files.push(read(root, Path::new("pom.xml"), FileRole::Manifest)?),
        Ecosystem::Rust => files.push(read(root, Path::new("Cargo.toml"), FileRole::Manifest)?),
    }
    ManifestProject::from_files(root, ecosystem, files)
}

/// Guesses the ecosystem from the manifest files present in `root`.
pub fn detect_ecosystem(root: &Path) -> Result<Ecosystem, ManifestError> {
    let probes: [(&str, Ecosystem); 8] = [
        ("requirements.txt", Ecosystem::Python),
        ("package.json", Ecosystem::Javascript),
        ("conanfile.txt", Ecosystem::CCpp),
        ("conanfile.py", Ecosystem::CCpp),
        ("packages.config", Ecosystem::Csharp),
        ("composer.json", Ecosystem::Php),
        ("pom.xml", Ecosystem::Java),
        ("Cargo.toml", Ecosystem::Rust),
    ];
    probes
        .into_iter()
        .find(|(file, _)| root.join(file).is_file())
        .map(|(_, e)| e)
        .ok_or_else(|| ManifestError::UndetectedEcosystem(root.to_path_buf()))
}

/// Rewrites the version of `name` in every file covered by `scope`. Bytes
/// outside version substrings are preserved and the pinned artifact store is
/// left alone: the attacker edits metadata, not archives.
pub fn tamper_version(
    project: &ManifestProject,
    name: &str,
    new_version: &str,
    scope: TamperScope,
) -> Result<ManifestProject, ManifestError> {
    if project.ecosystem.resolves_from_central_repository() {
        return Err(ManifestError::UnsupportedEcosystem(project.ecosystem));
    }
    let parsed = Version::parse(new_version)?;
    if project.dep(name).is_none() {
        return Err(ManifestError::UnknownDependency(name.to_string()));
    }
    let mut files = project.files.clone();
    let mut touched = 0;
    for file in files.iter_mut().filter(|f| scope.covers(f.role)) {
        let mut hits: Vec<Occurrence> = scan_file(project.ecosystem, file)?
            .into_iter()
            .filter(|o| o.name == name)
            .collect();
        hits.sort_by_key(|o| std::cmp::Reverse(o.span.start));
        for occ in hits {
            let replacement = match occ.form {
                VersionForm::Declared => new_version.to_string(),
                VersionForm::ComposerNormalized => composer::normalize(&parsed),
            };
            file.bytes.splice(occ.span.clone(), replacement.into_bytes());
            touched += 1;
        }
    }
    if touched == 0 {
        return Err(ManifestError::NotInScope {
            name: name.to_string(),
            scope,
        });
    }
    ManifestProject::from_files(project.root.clone(), project.ecosystem, files)
}

/// One row of the SBOM generation tampering results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TamperabilityEntry {
    pub language: &'static str,
    pub ecosystem: Ecosystem,
    pub tamperable: bool,
    pub files: Vec<&'static str>,
}

pub fn tamperability_table() -> Vec<TamperabilityEntry> {
    let row = |language, ecosystem, files: &[&'static str]| TamperabilityEntry {
        language,
        ecosystem,
        tamperable: !files.is_empty(),
        files: files.to_vec(),
    };
    vec![
        row("Python", Ecosystem::Python, &["requirements.txt"]),
        row("C", Ecosystem::CCpp, &["conanfile.txt", "conanfile.py"]),
        row("C++", Ecosystem::CCpp, &["conanfile.txt", "conanfile.py"]),
        row("C#", Ecosystem::Csharp, &["packages.config"]),
        row("Java", Ecosystem::Java, &[]),
        row(
            "JavaScript",
            Ecosystem::Javascript,
            &["package.json", "package-lock.json", "node_modules/*/package.json"],
        ),
        row(
            "PHP",
            Ecosystem::Php,
            &["composer.json", "composer.lock", "vendor/composer/installed.json"],
        ),
        row("Rust", Ecosystem::Rust, &[]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(eco: Ecosystem, files: &[(&str, FileRole, &str)]) -> ManifestProject {
        let files = files
            .iter()
            .map(|(p, r, b)| ManifestFile {
                path: p.into(),
                role: *r,
                bytes: b.as_bytes().to_vec(),
            })
            .collect();
        ManifestProject::from_files("/nonexistent", eco, files).unwrap()
    }

    #[test]
    fn table_rows() {
        let table = tamperability_table();
        assert_eq!(table.len(), 8);
        let by = |lang: &str| table.iter().find(|e| e.language == lang).unwrap().clone();
        assert_eq!(by("C#").files, ["packages.config"]);
        assert_eq!(by("Python").files, ["requirements.txt"]);
        assert!(!by("Java").tamperable);
        assert!(!by("Rust").tamperable);
        let tamperable: Vec<_> = table.iter().filter(|e| e.tamperable).map(|e| e.language).collect();
        assert_eq!(tamperable, ["Python", "C", "C++", "C#", "JavaScript", "PHP"]);
    }

    #[test]
    fn tamper_rewrites_only_version() {
        let p = project(
            Ecosystem::CCpp,
            &[("conanfile.txt", FileRole::Manifest, "[requires]\npoco-demo/1.9\nzlib/1.9\n")],
        );
        let t = tamper_version(&p, "poco-demo", "1.13", TamperScope::AllLocations).unwrap();
        assert_eq!(t.manifest_files()[0].bytes, b"[requires]\npoco-demo/1.13\nzlib/1.9\n");
        assert_eq!(t.dep("poco-demo").unwrap().version, "1.13");
        assert_eq!(t.dep("zlib").unwrap().version, "1.9");
    }

    #[test]
    fn conflicts_flagged_and_lock_wins() {
        let p = project(
            Ecosystem::Javascript,
            &[
                ("package.json", FileRole::Manifest, r#"{"dependencies":{"a":"1.1.0"}}"#),
                ("package-lock.json", FileRole::Lock, r#"{"packages":{"node_modules/a":{"version":"1.0.0"},"node_modules/b":{"version":"2.0.0"}}}"#),
            ],
        );
        assert_eq!(p.deps().len(), 2);
        assert_eq!(p.dep("a").unwrap().version, "1.0.0");
        assert_eq!(p.dep("a").unwrap().source_file, Path::new("package-lock.json"));
        assert_eq!(p.conflicts().len(), 1);
        assert_eq!(p.conflicts()[0].name, "a");
    }

    #[test]
    fn scope_selects_files() {
        let p = project(
            Ecosystem::Javascript,
            &[
                ("package.json", FileRole::Manifest, r#"{"dependencies":{"a":"1.0.0"}}"#),
                ("package-lock.json", FileRole::Lock, r#"{"packages":{"node_modules/a":{"version":"1.0.0"}}}"#),
            ],
        );
        let t = tamper_version(&p, "a", "9.0.0", TamperScope::ManifestOnly).unwrap();
        // The lock file still says 1.0.0 and outranks package.json.
        assert_eq!(t.dep("a").unwrap().version, "1.0.0");
        assert_eq!(t.conflicts().len(), 1);
        let t = tamper_version(&p, "a", "9.0.0", TamperScope::ManifestAndLock).unwrap();
        assert_eq!(t.dep("a").unwrap().version, "9.0.0");
        assert!(t.conflicts().is_empty());
    }

    #[test]
    fn tamper_errors() {
        let p = project(Ecosystem::Python, &[("requirements.txt", FileRole::Manifest, "a==1.0\n")]);
        assert!(matches!(
            tamper_version(&p, "b", "1.1", TamperScope::AllLocations),
            Err(ManifestError::UnknownDependency(_))
        ));
        assert!(matches!(
            tamper_version(&p, "a", "not-a-version", TamperScope::AllLocations),
            Err(ManifestError::InvalidVersion(_))
        ));
        let j = project(
            Ecosystem::Java,
            &[("pom.xml", FileRole::Manifest, "<dependency><groupId>g</groupId><artifactId>a</artifactId><version>1.0</version></dependency>")],
        );
        assert!(matches!(
            tamper_version(&j, "g:a", "1.1", TamperScope::AllLocations),
            Err(ManifestError::UnsupportedEcosystem(Ecosystem::Java))
        ));
    }

    #[test]
    fn lock_only_dependency_out_of_manifest_scope() {
        let p = project(
            Ecosystem::Javascript,
            &[
                ("package.json", FileRole::Manifest, r#"{"dependencies":{}}"#),
                ("package-lock.json", FileRole::Lock, r#"{"packages":{"node_modules/t":{"version":"1.0.0"}}}"#),
            ],
        );
        assert!(matches!(
            tamper_version(&p, "t", "2.0.0", TamperScope::ManifestOnly),
            Err(ManifestError::NotInScope { .. })
        ));
    }
}
