//! End-to-end attack walkthrough: pin, tamper, then compare what a naive
//! pipeline reports with what the hash-verified pipeline reports.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use serde::Serialize;
use uuid::Uuid;

use crate::crypto::Keypair;
use crate::ecosystem::Ecosystem;
use crate::generator::{
    generate_naive, generate_secure, pin_artifacts, ArtifactSource, ArtifactStore, GenerationOptions, GeneratorError,
};
use crate::manifest::{parse_project, tamper_version, ManifestError, TamperScope};
use crate::model::{sign_document_with, SbomDocument, SignatureEnvelope};
use crate::registry::{LocalRegistry, ReferenceProvider, RegistryError, ARCHIVES_DIR, REGISTRY_FILE};
use crate::verifier::{
    match_advisories, parse_advisories, verify, Advisory, AdvisoryError, AdvisoryReport, Overall, VerdictStatus,
    VerificationReport,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperSpec {
    pub dependency: String,
    pub new_version: String,
    pub scope: TamperScope,
}

impl TamperSpec {
    pub fn new(dependency: impl Into<String>, new_version: impl Into<String>) -> Self {
        TamperSpec {
            dependency: dependency.into(),
            new_version: new_version.into(),
            scope: TamperScope::AllLocations,
        }
    }
}

/// Everything the pipeline needs besides the project itself.
pub struct DemoContext<'a> {
    pub source: &'a dyn ArtifactSource,
    pub provider: &'a dyn ReferenceProvider,
    pub advisories: &'a [Advisory],
    pub signer: &'a Keypair,
    pub options: GenerationOptions,
}

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Advisory(#[from] AdvisoryError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub naive_sbom: SbomDocument,
    pub naive_report: AdvisoryReport,
    pub secure_sbom: SbomDocument,
    pub envelope: SignatureEnvelope,
    pub secure_report: VerificationReport,
}

/// Pins the project's artifacts, applies `tampers` to the manifests on disk,
/// then runs both generators on the edited project. The secure SBOM is signed
/// by `ctx.signer` and verified with that key as the only trusted one.
pub fn demo_attack_pipeline(
    project_root: &Path,
    ecosystem: Ecosystem,
    tampers: &[TamperSpec],
    ctx: &DemoContext<'_>,
) -> Result<DemoOutcome, DemoError> {
    let project = parse_project(project_root, ecosystem)?;
    pin_artifacts(&project, ctx.source)?;

    let mut edited = project;
    for t in tampers {
        edited = tamper_version(&edited, &t.dependency, &t.new_version, t.scope)?;
    }
    if !tampers.is_empty() {
        edited.write_files()?;
    }
    let project = parse_project(project_root, ecosystem)?;

    let naive_sbom = generate_naive(&project, &ctx.options)?;
    let naive_report = match_advisories(&naive_sbom, ctx.advisories);

    let store = ArtifactStore::open(project_root)?;
    let secure_sbom = generate_secure(&project, &store, &ctx.options)?;
    let envelope = sign_document_with(&secure_sbom, ctx.signer);
    let trusted = HashSet::from([ctx.signer.public_key()]);
    let secure_report = verify(&secure_sbom, Some(&envelope), &trusted, ctx.provider);
    Ok(DemoOutcome {
        naive_sbom,
        naive_report,
        secure_sbom,
        envelope,
        secure_report,
    })
}

// ---- bundled Poco scenario ---------------------------------------------------

pub const POCO_PACKAGE: &str = "poco-demo";
pub const POCO_VULNERABLE: &str = "1.9";
pub const POCO_FIXED: &str = "1.13";

const POCO_CONANFILE: &[u8] = include_bytes!("../fixtures/projects/c/conanfile.txt");
const POCO_REGISTRY: &[u8] = include_bytes!("../fixtures/registry/registry.json");
const POCO_ADVISORIES: &[u8] = include_bytes!("../fixtures/advisories.json");
const POCO_ARCHIVES: &[(&str, &[u8])] = &[
    ("poco-demo-1.9.tgz", include_bytes!("../fixtures/registry/archives/poco-demo-1.9.tgz")),
    ("poco-demo-1.13.tgz", include_bytes!("../fixtures/registry/archives/poco-demo-1.13.tgz")),
    ("zlib-1.2.13.tgz", include_bytes!("../fixtures/registry/archives/zlib-1.2.13.tgz")),
    ("zlib-1.3.tgz", include_bytes!("../fixtures/registry/archives/zlib-1.3.tgz")),
    ("openssl-3.1.4.tgz", include_bytes!("../fixtures/registry/archives/openssl-3.1.4.tgz")),
    ("openssl-3.2.0.tgz", include_bytes!("../fixtures/registry/archives/openssl-3.2.0.tgz")),
];

/// Fixed signing seed so demo output is reproducible.
const DEMO_SEED: [u8; 32] = [0x5b; 32];

fn write(path: &Path, bytes: &[u8]) -> Result<(), DemoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| DemoError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, bytes).map_err(|source| DemoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the C/C++ Poco project to `dir`.
pub fn write_poco_project(dir: &Path) -> Result<(), DemoError> {
    write(&dir.join("conanfile.txt"), POCO_CONANFILE)
}

/// Writes a local registry holding the Poco scenario's archives.
pub fn write_poco_registry(dir: &Path) -> Result<(), DemoError> {
    write(&dir.join(REGISTRY_FILE), POCO_REGISTRY)?;
    for (name, bytes) in POCO_ARCHIVES {
        write(&dir.join(ARCHIVES_DIR).join(name), bytes)?;
    }
    Ok(())
}

pub fn poco_advisories() -> Vec<Advisory> {
    parse_advisories(POCO_ADVISORIES).expect("bundled advisories parse")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub sbom_version: String,
    pub advisory_hits: usize,
    pub advisory_ids: Vec<String>,
    pub secure_overall: Overall,
    pub hash_mismatches: usize,
    pub verified: usize,
}

fn summarize(outcome: &DemoOutcome) -> RunSummary {
    let sbom_version = outcome
        .naive_sbom
        .components()
        .iter()
        .find(|c| c.name() == POCO_PACKAGE)
        .map(|c| c.version().to_string())
        .unwrap_or_default();
    RunSummary {
        sbom_version,
        advisory_hits: outcome.naive_report.hits.len(),
        advisory_ids: outcome.naive_report.hits.iter().map(|h| h.advisory_id.clone()).collect(),
        secure_overall: outcome.secure_report.overall,
        hash_mismatches: outcome.secure_report.count(VerdictStatus::HashMismatch),
        verified: outcome.secure_report.count(VerdictStatus::Verified),
    }
}

#[derive(Debug, Clone)]
pub struct PocoDemo {
    pub control: DemoOutcome,
    pub attack: DemoOutcome,
}

impl PocoDemo {
    pub fn control_summary(&self) -> RunSummary {
        summarize(&self.control)
    }

    pub fn attack_summary(&self) -> RunSummary {
        summarize(&self.attack)
    }
}

/// Runs the Poco scenario twice under `workdir`: an untouched control and an
/// attack that raises the declared version from 1.9 to 1.13. Timestamps,
/// serial numbers and the signing key are fixed, so output is deterministic.
pub fn run_poco_demo(workdir: &Path) -> Result<PocoDemo, DemoError> {
    let registry_dir = workdir.join("registry");
    write_poco_registry(&registry_dir)?;
    let registry = LocalRegistry::open(&registry_dir)?;
    let advisories = poco_advisories();
    let signer = Keypair::from_seed(DEMO_SEED);
    let ctx = DemoContext {
        source: &registry,
        provider: &registry,
        advisories: &advisories,
        signer: &signer,
        options: GenerationOptions::fixed(Utc.timestamp_opt(1_700_000_000, 0).unwrap(), Uuid::nil()),
    };
    let mut runs = Vec::new();
    for (sub, tampers) in [
        ("control", Vec::new()),
        ("attack", vec![TamperSpec::new(POCO_PACKAGE, POCO_FIXED)]),
    ] {
        let dir = workdir.join(sub);
        write_poco_project(&dir)?;
        runs.push(demo_attack_pipeline(&dir, Ecosystem::CCpp, &tampers, &ctx)?);
    }
    let attack = runs.pop().expect("two runs");
    let control = runs.pop().expect("two runs");
    Ok(PocoDemo { control, attack })
}
