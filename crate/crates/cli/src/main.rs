//! `sbomguard` command-line tool.
//!
//! Exit codes: 0 success, 1 other error, 2 usage, 3 signature failure,
//! 4 hash verification failure, 5 ledger integrity failure, 6 provider
//! unavailable.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sbomguard::demo::{run_poco_demo, DemoError, POCO_FIXED, POCO_PACKAGE, POCO_VULNERABLE};
use sbomguard::feasibility::{estimate_storage, estimate_verification_time, registration_latency_note, FeasibilityInputs};
use sbomguard::generator::{generate_naive, generate_secure, pin_artifacts, ArtifactStore, GenerationOptions, GeneratorError};
use sbomguard::ledger::{audit_dir, AuditReport, ChainKind, DualLedger, LedgerConfig, LedgerError, LEDGER_DIR_ENV};
use sbomguard::manifest::{detect_ecosystem, parse_project, tamper_version, ManifestError, ManifestProject, TamperScope};
use sbomguard::model::{canonical_serialize, sign_document_with, ModelError, SBOM_EXTENSION, SIGNATURE_EXTENSION};
use sbomguard::registry::{IndexClient, LocalRegistry, ReferenceProvider, RegistryError, REGISTRY_URL_ENV};
use sbomguard::verifier::{load_advisories, match_advisories, verify, AdvisoryError, Rejection, VerdictStatus, VerificationReport};
use sbomguard::{Ecosystem, Hash256, Keypair, PublicKey, SbomDocument, SignatureEnvelope};

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SIGNATURE: u8 = 3;
const EXIT_HASH: u8 = 4;
const EXIT_LEDGER: u8 = 5;
const EXIT_PROVIDER: u8 = 6;

#[derive(Parser)]
#[command(name = "sbomguard", version, about = "Tamper-evident SBOM generation and verification")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create an Ed25519 signing key file.
    Keygen {
        #[arg(long, short)]
        out: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Download and hash every dependency into <project>/.pinned.
    Pin {
        project: PathBuf,
        #[command(flatten)]
        eco: EcoArg,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Produce an SBOM for a project.
    Generate {
        project: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Write here instead of standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[command(flatten)]
        eco: EcoArg,
    },
    /// Rewrite a dependency's declared version in the project's manifests.
    Tamper {
        project: PathBuf,
        #[arg(long)]
        dep: String,
        #[arg(long)]
        to: String,
        /// manifest_only, manifest_and_lock or all_locations.
        #[arg(long, default_value = "all_locations")]
        scope: TamperScope,
        #[command(flatten)]
        eco: EcoArg,
    },
    /// Write a detached signature next to an SBOM.
    Sign {
        sbom: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check an SBOM's signature and every component's hash.
    Verify {
        sbom: PathBuf,
        /// Signature file; defaults to the SBOM path with a .sbom.sig extension.
        #[arg(long)]
        sig: Option<PathBuf>,
        /// File with one trusted public key (hex) per line.
        #[arg(long, env = "SBOMGUARD_TRUSTED_KEYS")]
        trusted: Option<PathBuf>,
        /// Check hashes against the ledger instead of a registry.
        #[arg(long)]
        ledger: bool,
        #[arg(long, env = LEDGER_DIR_ENV)]
        ledger_dir: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Match an SBOM's components against an advisory database by version.
    Advisories {
        sbom: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Operate on the dual ledger.
    Ledger(LedgerArgs),
    /// Storage and verification-time estimates for the ledger.
    Estimate(EstimateArgs),
    /// Bundled end-to-end scenarios.
    Demo {
        #[command(subcommand)]
        scenario: DemoScenario,
    },
}

#[derive(Args)]
struct EcoArg {
    /// Ecosystem; detected from the project files when omitted.
    #[arg(long)]
    ecosystem: Option<Ecosystem>,
}

#[derive(Args)]
struct SourceArgs {
    /// Local registry directory or registry.json.
    #[arg(long, env = "SBOMGUARD_REGISTRY")]
    registry: Option<PathBuf>,
    /// Base URL of a package index.
    #[arg(long, env = REGISTRY_URL_ENV)]
    registry_url: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Naive,
    Secure,
}

#[derive(Args)]
struct LedgerArgs {
    #[arg(long, env = LEDGER_DIR_ENV)]
    dir: PathBuf,
    /// Simulated confirmation delay reported after sealing.
    #[arg(long, global = true)]
    confirmation_delay_ms: Option<u64>,
    #[command(subcommand)]
    op: LedgerOp,
}

#[derive(Subcommand)]
enum LedgerOp {
    /// Claim an unowned library name.
    Claim {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        name: String,
    },
    /// Hand a library name to another key.
    Transfer {
        #[arg(long)]
        key: PathBuf,
        /// Recipient public key (hex).
        #[arg(long)]
        to: String,
        #[arg(long)]
        name: String,
    },
    /// Record the artifact hash of one release.
    Register {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        version: String,
        #[arg(long, conflicts_with = "artifact", required_unless_present = "artifact")]
        hash: Option<Hash256>,
        /// Hash this file instead of passing --hash.
        #[arg(long)]
        artifact: Option<PathBuf>,
    },
    /// Look up a release and prove who recorded it.
    Query {
        #[arg(long)]
        name: String,
        #[arg(long)]
        version: String,
    },
    /// Seal pending transactions into blocks.
    Seal {
        #[arg(long, value_enum, default_value = "all")]
        chain: SealChain,
    },
    /// Re-verify both chains from disk.
    Audit,
}

#[derive(Clone, Copy, ValueEnum)]
enum SealChain {
    Identity,
    Library,
    All,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, default_value_t = 100_000_000)]
    developers: u64,
    #[arg(long, default_value_t = 284_000_000)]
    repos: u64,
    #[arg(long, default_value_t = 10)]
    versions: u64,
    #[arg(long, default_value_t = 1000)]
    deps: u64,
    #[arg(long, default_value_t = 0.5)]
    identity_check_ms: f64,
    #[arg(long, default_value_t = 1.5)]
    library_check_ms: f64,
}

#[derive(Subcommand)]
enum DemoScenario {
    /// Raise poco-demo from 1.9 to 1.13 and compare naive and secure results.
    Poco {
        /// Keep the generated projects here instead of a temporary directory.
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

macro_rules! coded {
    ($($ty:ty => |$e:ident| $code:expr),* $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from($e: $ty) -> Self {
                CliError::new($code, $e.to_string())
            }
        }
    )*};
}

coded! {
    ManifestError => |e| EXIT_ERROR,
    ModelError => |e| EXIT_ERROR,
    AdvisoryError => |e| EXIT_ERROR,
    sbomguard::crypto::KeyError => |e| EXIT_ERROR,
    RegistryError => |e| registry_code(&e),
    GeneratorError => |e| generator_code(&e),
    LedgerError => |e| ledger_code(&e),
    DemoError => |e| match &e {
        DemoError::Generator(g) => generator_code(g),
        DemoError::Registry(r) => registry_code(r),
        _ => EXIT_ERROR,
    },
}

fn registry_code(e: &RegistryError) -> u8 {
    match e {
        RegistryError::ProviderUnavailable(_) => EXIT_PROVIDER,
        _ => EXIT_ERROR,
    }
}

fn generator_code(e: &GeneratorError) -> u8 {
    match e {
        GeneratorError::Source { .. } => EXIT_PROVIDER,
        GeneratorError::DownloadIntegrity { .. } | GeneratorError::StoreTampered { .. } => EXIT_HASH,
        _ => EXIT_ERROR,
    }
}

fn ledger_code(e: &LedgerError) -> u8 {
    match e {
        LedgerError::Corrupt(_) | LedgerError::BadSignature { .. } | LedgerError::OwnershipMismatch { .. } => {
            EXIT_LEDGER
        }
        _ => EXIT_ERROR,
    }
}

/// What a command prints, in both formats, and how the process exits.
struct Output {
    text: String,
    json: Value,
    code: u8,
}

impl Output {
    fn ok(text: impl Into<String>, json: Value) -> Self {
        Output {
            text: text.into(),
            json,
            code: 0,
        }
    }
}

type CmdResult = Result<Output, CliError>;

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::new(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::new(EXIT_ERROR, format!("{}: {e}", path.display())))
}

fn load_key(path: &Path) -> Result<Keypair, CliError> {
    let text = String::from_utf8(read(path)?).map_err(|_| CliError::new(EXIT_ERROR, "key file is not UTF-8"))?;
    Ok(Keypair::from_json(&text)?)
}

fn load_sbom(path: &Path) -> Result<SbomDocument, CliError> {
    Ok(SbomDocument::from_json(&read(path)?)?)
}

fn load_project(root: &Path, eco: &EcoArg) -> Result<ManifestProject, CliError> {
    let eco = match eco.ecosystem {
        Some(e) => e,
        None => detect_ecosystem(root)?,
    };
    Ok(parse_project(root, eco)?)
}

/// `x.sbom.json` signs to `x.sbom.sig`; anything else gets `.sig` appended.
fn signature_path(sbom: &Path) -> PathBuf {
    let s = sbom.to_string_lossy();
    match s.strip_suffix(SBOM_EXTENSION) {
        Some(stem) => PathBuf::from(format!("{stem}{SIGNATURE_EXTENSION}")),
        None => PathBuf::from(format!("{s}.sig")),
    }
}

fn load_trusted(path: Option<&Path>) -> Result<HashSet<PublicKey>, CliError> {
    let Some(path) = path else { return Ok(HashSet::new()) };
    let text = String::from_utf8(read(path)?).map_err(|_| CliError::new(EXIT_ERROR, "trusted keys file is not UTF-8"))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| PublicKey::from_hex(l).map_err(|e| CliError::new(EXIT_USAGE, format!("trusted key {l:?}: {e}"))))
        .collect()
}

fn provider(source: &SourceArgs) -> Result<Box<dyn ReferenceProvider>, CliError> {
    match (&source.registry, &source.registry_url) {
        (Some(path), _) => Ok(Box::new(LocalRegistry::open(path)?)),
        (None, Some(url)) => Ok(Box::new(IndexClient::new(url))),
        (None, None) => Err(CliError::new(EXIT_USAGE, "no registry: pass --registry or --registry-url")),
    }
}

fn cmd_keygen(out: &Path, force: bool) -> CmdResult {
    if out.exists() && !force {
        return Err(CliError::new(EXIT_ERROR, format!("{} exists; pass --force to overwrite", out.display())));
    }
    let kp = Keypair::generate();
    write(out, kp.to_json().as_bytes())?;
    let pk = kp.public_key().to_hex();
    Ok(Output::ok(
        format!("wrote {}\npublic key {pk}", out.display()),
        json!({ "key_file": out, "public_key": pk }),
    ))
}

fn cmd_pin(project: &Path, eco: &EcoArg, source: &SourceArgs) -> CmdResult {
    let project = load_project(project, eco)?;
    let store = match (&source.registry, &source.registry_url) {
        (Some(path), _) => pin_artifacts(&project, &LocalRegistry::open(path)?)?,
        (None, Some(url)) => pin_artifacts(&project, &IndexClient::new(url))?,
        (None, None) => return Err(CliError::new(EXIT_USAGE, "no registry: pass --registry or --registry-url")),
    };
    let mut text = format!("pinned {} artifacts in {}", store.entries().len(), store.root().display());
    for e in store.entries() {
        text.push_str(&format!("\n  {}@{}  {}  {}", e.name, e.version, e.filename, e.sha256));
    }
    Ok(Output::ok(text, json!({ "store": store.root(), "entries": store.entries() })))
}

fn cmd_generate(project: &Path, mode: Mode, out: Option<&Path>, eco: &EcoArg) -> CmdResult {
    let project = load_project(project, eco)?;
    let options = GenerationOptions::default();
    let doc = match mode {
        Mode::Naive => generate_naive(&project, &options)?,
        Mode::Secure => generate_secure(&project, &ArtifactStore::open(project.root())?, &options)?,
    };
    let bytes = canonical_serialize(&doc);
    match out {
        Some(path) => {
            write(path, &bytes)?;
            Ok(Output::ok(
                format!("wrote {} ({} components, {} mode)", path.display(), doc.components().len(), doc.tool_mode().as_str()),
                json!({ "sbom": path, "components": doc.components().len(), "mode": doc.tool_mode().as_str() }),
            ))
        }
        None => Ok(Output::ok(String::from_utf8(bytes).expect("JSON is UTF-8"), doc.to_value())),
    }
}

fn cmd_tamper(project: &Path, dep: &str, to: &str, scope: TamperScope, eco: &EcoArg) -> CmdResult {
    let project = load_project(project, eco)?;
    let before = project.dep(dep).map(|d| d.version.clone());
    let edited = tamper_version(&project, dep, to, scope)?;
    edited.write_files()?;
    let changed: Vec<&Path> = project
        .manifest_files()
        .iter()
        .zip(edited.manifest_files())
        .filter(|(a, b)| a.bytes != b.bytes)
        .map(|(a, _)| a.path.as_path())
        .collect();
    let from = before.unwrap_or_default();
    let mut text = format!("{dep}: {from} -> {to}");
    for p in &changed {
        text.push_str(&format!("\n  rewrote {}", p.display()));
    }
    Ok(Output::ok(text, json!({ "dependency": dep, "from": from, "to": to, "files": changed })))
}

fn cmd_sign(sbom: &Path, key: &Path, out: Option<&Path>) -> CmdResult {
    let doc = load_sbom(sbom)?;
    let kp = load_key(key)?;
    let env = sign_document_with(&doc, &kp);
    let out = out.map_or_else(|| signature_path(sbom), Path::to_path_buf);
    write(&out, &env.to_bytes())?;
    let pk = kp.public_key().to_hex();
    Ok(Output::ok(
        format!("wrote {} (signer {pk})", out.display()),
        json!({ "signature": out, "signer": pk }),
    ))
}

fn verify_code(report: &VerificationReport) -> u8 {
    match report.rejection {
        None => 0,
        Some(Rejection::SignatureAbsent | Rejection::SignatureInvalid | Rejection::UntrustedSigner) => EXIT_SIGNATURE,
        Some(Rejection::NaiveSbom) => EXIT_HASH,
        Some(Rejection::ComponentFailures) => {
            if report.failing().any(|v| v.status != VerdictStatus::ProviderError) {
                EXIT_HASH
            } else {
                EXIT_PROVIDER
            }
        }
    }
}

fn render_report(report: &VerificationReport) -> String {
    let mut text = format!("signature: {:?}", report.signature_status).to_lowercase();
    if let Some(s) = &report.signer {
        text.push_str(&format!(" ({s})"));
    }
    for v in &report.verdicts {
        let status = serde_json::to_value(v.status).ok().and_then(|s| s.as_str().map(str::to_string)).unwrap_or_default();
        text.push_str(&format!("\n  {:<16} {}@{}", status, v.name, v.version));
        if let Some(d) = &v.detail {
            text.push_str(&format!("  ({d})"));
        }
    }
    let overall = if report.passed() { "PASS" } else { "FAIL" };
    text.push_str(&format!("\noverall: {overall}"));
    if let Some(r) = report.rejection {
        text.push_str(&format!(": {}", r.message()));
    }
    text
}

fn cmd_verify(
    sbom: &Path,
    sig: Option<&Path>,
    trusted: Option<&Path>,
    ledger: bool,
    ledger_dir: Option<&Path>,
    source: &SourceArgs,
) -> CmdResult {
    let doc = load_sbom(sbom)?;
    let sig_path = sig.map_or_else(|| signature_path(sbom), Path::to_path_buf);
    let envelope = match fs::read(&sig_path) {
        Ok(bytes) => Some(SignatureEnvelope::from_bytes(&bytes).map_err(|e| CliError::new(EXIT_SIGNATURE, e.to_string()))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && sig.is_none() => None,
        Err(e) => return Err(CliError::new(EXIT_ERROR, format!("{}: {e}", sig_path.display()))),
    };
    let trusted = load_trusted(trusted)?;
    let provider: Box<dyn ReferenceProvider> = if ledger {
        let dir = ledger_dir.ok_or_else(|| CliError::new(EXIT_USAGE, "--ledger needs --ledger-dir or SBOMGUARD_LEDGER_DIR"))?;
        Box::new(DualLedger::open(dir, LedgerConfig::instant())?)
    } else {
        provider(source)?
    };
    let report = verify(&doc, envelope.as_ref(), &trusted, provider.as_ref());
    Ok(Output {
        text: render_report(&report),
        json: serde_json::to_value(&report).expect("report serializes"),
        code: verify_code(&report),
    })
}

fn cmd_advisories(sbom: &Path, db: &Path) -> CmdResult {
    let doc = load_sbom(sbom)?;
    let report = match_advisories(&doc, &load_advisories(db)?);
    let mut text = format!("{} advisory hit(s)", report.hits.len());
    for h in &report.hits {
        text.push_str(&format!("\n  {} {}@{} (< {}): {}", h.advisory_id, h.name, h.version, h.affected_below, h.summary));
    }
    for p in &report.problems {
        text.push_str(&format!("\n  unparseable version {}@{}: {}", p.name, p.version, p.message));
    }
    Ok(Output::ok(text, serde_json::to_value(&report).expect("report serializes")))
}

fn render_audit(report: &AuditReport) -> String {
    let mut text = format!(
        "identity chain: {} block(s), library chain: {} block(s)",
        report.identity_blocks, report.library_blocks
    );
    for f in &report.findings {
        let at = f.height.map_or_else(|| "-".to_string(), |h| h.to_string());
        text.push_str(&format!("\n  {} block {at}: {:?}: {}", f.chain, f.kind, f.detail));
    }
    text.push_str(if report.ok() { "\naudit: OK" } else { "\naudit: FAILED" });
    text
}

fn cmd_ledger(args: &LedgerArgs) -> CmdResult {
    let config = LedgerConfig {
        confirmation_delay_ms: args.confirmation_delay_ms.unwrap_or(LedgerConfig::default().confirmation_delay_ms),
    };
    if let LedgerOp::Audit = args.op {
        let report = audit_dir(&args.dir)?;
        return Ok(Output {
            text: render_audit(&report),
            json: serde_json::to_value(&report).expect("audit serializes"),
            code: if report.ok() { 0 } else { EXIT_LEDGER },
        });
    }
    let mut ledger = match DualLedger::open(&args.dir, config) {
        Ok(l) => l,
        Err(LedgerError::Corrupt(report)) => {
            return Ok(Output {
                text: format!("ledger failed its integrity check\n{}", render_audit(&report)),
                json: json!({ "error": "ledger integrity check failed", "audit": report }),
                code: EXIT_LEDGER,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let out = match &args.op {
        LedgerOp::Claim { key, name } => {
            let tx = ledger.claim_ownership(&load_key(key)?, name)?;
            Output::ok(
                format!("queued claim of {name} ({})", tx.id),
                json!({ "queued": "claim", "name": name, "tx_id": tx.id, "timestamp": tx.timestamp }),
            )
        }
        LedgerOp::Transfer { key, to, name } => {
            let to = PublicKey::from_hex(to).map_err(|e| CliError::new(EXIT_USAGE, format!("--to: {e}")))?;
            let tx = ledger.transfer_ownership(&load_key(key)?, to, name)?;
            Output::ok(
                format!("queued transfer of {name} to {to} ({})", tx.id),
                json!({ "queued": "transfer", "name": name, "to": to, "tx_id": tx.id, "timestamp": tx.timestamp }),
            )
        }
        LedgerOp::Register { key, name, version, hash, artifact } => {
            let hash = match (hash, artifact) {
                (Some(h), _) => *h,
                (None, Some(path)) => Hash256::of_file(path)
                    .map_err(|e| CliError::new(EXIT_ERROR, format!("{}: {e}", path.display())))?,
                (None, None) => unreachable!("clap requires one of --hash or --artifact"),
            };
            let tx = ledger.register_library(&load_key(key)?, name, version, hash)?;
            Output::ok(
                format!("queued {name} {version} = {hash} ({})", tx.id),
                json!({ "queued": "register", "name": name, "version": tx.version, "artifact_hash": hash, "tx_id": tx.id, "timestamp": tx.timestamp }),
            )
        }
        LedgerOp::Query { name, version } => {
            let e = ledger.query_and_verify(name, version)?;
            let t = &e.transaction;
            return Ok(Output::ok(
                format!(
                    "{name} {} = {}\n  recorded at {} by {}\n  owner since {} via {}",
                    t.version, t.artifact_hash, t.timestamp, t.owner_pubkey, e.proof.owned_since, e.proof.ownership_tx_id
                ),
                json!({
                    "name": name,
                    "version": t.version,
                    "artifact_hash": t.artifact_hash,
                    "tx_id": t.id,
                    "timestamp": t.timestamp,
                    "owner": t.owner_pubkey,
                    "proof": e.proof,
                }),
            ));
        }
        LedgerOp::Seal { chain } => {
            let outcome = match chain {
                SealChain::Identity => ledger.form_block(ChainKind::Identity)?,
                SealChain::Library => ledger.form_block(ChainKind::Library)?,
                SealChain::All => ledger.seal_all()?,
            };
            let mut text = format!("{} accepted, {} rejected", outcome.accepted, outcome.rejected.len());
            for b in &outcome.blocks {
                text.push_str(&format!("\n  {} block {}: {} tx, {}", b.chain, b.height, b.tx_count, b.hash));
            }
            for r in &outcome.rejected {
                text.push_str(&format!("\n  rejected {} {}: {}", r.chain, r.tx_id, r.reason));
            }
            if let Some(at) = outcome.confirmed_at {
                text.push_str(&format!("\n  confirmed at {at} ms"));
            }
            Output::ok(text, serde_json::to_value(&outcome).expect("seal outcome serializes"))
        }
        LedgerOp::Audit => unreachable!("handled above"),
    };
    ledger.save(&args.dir)?;
    Ok(out)
}

fn cmd_estimate(a: &EstimateArgs) -> CmdResult {
    let inputs = FeasibilityInputs {
        developers: a.developers,
        repositories: a.repos,
        avg_versions_per_library: a.versions,
        per_identity_check_ms: a.identity_check_ms,
        per_library_check_ms: a.library_check_ms,
        deps_per_app: a.deps,
        ..FeasibilityInputs::default()
    };
    let storage = estimate_storage(&inputs);
    let seconds = estimate_verification_time(&inputs);
    let latency = registration_latency_note();
    Ok(Output::ok(
        format!(
            "identity ledger: {:.2} GiB\nlibrary ledger: {:.2} GiB\nverification: {seconds} s for {} dependencies\nregistration: ~{} min to confirm",
            storage.identity_gib, storage.library_gib, a.deps, latency.confirmation_delay_min
        ),
        json!({
            "inputs": inputs,
            "identity_gib": storage.identity_gib,
            "library_gib": storage.library_gib,
            "verification_seconds": seconds,
            "registration_latency": latency,
        }),
    ))
}

fn cmd_demo_poco(workdir: Option<&Path>) -> CmdResult {
    let temp;
    let dir = match workdir {
        Some(d) => d,
        None => {
            temp = tempfile::tempdir().map_err(|e| CliError::new(EXIT_ERROR, e.to_string()))?;
            temp.path()
        }
    };
    let demo = run_poco_demo(dir)?;
    let (c, a) = (demo.control_summary(), demo.attack_summary());
    let verdict = |o: sbomguard::verifier::Overall| if o == sbomguard::verifier::Overall::Pass { "PASS" } else { "FAIL" };
    let text = format!(
        "control: {POCO_PACKAGE}@{POCO_VULNERABLE}\n  naive advisory hits = {} {:?}\n  secure verify = {}\n\
         attack: {POCO_PACKAGE} {POCO_VULNERABLE} -> {POCO_FIXED} in conanfile.txt\n  naive SBOM shows {POCO_PACKAGE}@{}\n  \
         naive advisory hits = {} after tamper\n  secure verify = {} ({} hash mismatch)",
        c.advisory_hits,
        c.advisory_ids,
        verdict(c.secure_overall),
        a.sbom_version,
        a.advisory_hits,
        verdict(a.secure_overall),
        a.hash_mismatches,
    );
    Ok(Output::ok(text, json!({ "control": c, "attack": a })))
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Keygen { out, force } => cmd_keygen(out, *force),
        Command::Pin { project, eco, source } => cmd_pin(project, eco, source),
        Command::Generate { project, mode, out, eco } => cmd_generate(project, *mode, out.as_deref(), eco),
        Command::Tamper { project, dep, to, scope, eco } => cmd_tamper(project, dep, to, *scope, eco),
        Command::Sign { sbom, key, out } => cmd_sign(sbom, key, out.as_deref()),
        Command::Verify { sbom, sig, trusted, ledger, ledger_dir, source } => {
            cmd_verify(sbom, sig.as_deref(), trusted.as_deref(), *ledger, ledger_dir.as_deref(), source)
        }
        Command::Advisories { sbom, db } => cmd_advisories(sbom, db),
        Command::Ledger(args) => cmd_ledger(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Demo { scenario: DemoScenario::Poco { workdir } } => cmd_demo_poco(workdir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let body = if cli.json {
                serde_json::to_string_pretty(&out.json).expect("output serializes")
            } else {
                out.text
            };
            // A closed pipe is not worth a panic.
            let _ = writeln!(std::io::stdout(), "{body}");
            ExitCode::from(out.code)
        }
        Err(e) => {
            if cli.json {
                let _ = writeln!(std::io::stdout(), "{}", json!({ "error": e.message, "exit_code": e.code }));
            } else {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}
