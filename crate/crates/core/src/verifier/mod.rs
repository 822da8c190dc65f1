//! Fail-closed SBOM consumption: the document signature is mandatory and
//! every component hash is checked against a reference provider.

mod advisories;

pub use advisories::{
    load_advisories, match_advisories, parse_advisories, Advisory, AdvisoryError, AdvisoryHit,
    AdvisoryReport, VersionProblem,
};

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::crypto::PublicKey;
use crate::ecosystem::PackageCoords;
use crate::hash::Hash256;
use crate::model::{verify_document_signature, Component, SbomDocument, SignatureEnvelope, SignatureStatus, ToolMode};
use crate::registry::{ReferenceProvider, RegistryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Verified,
    HashMismatch,
    MissingHash,
    NotInRegistry,
    ProviderError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComponentVerdict {
    pub name: String,
    pub version: String,
    pub purl: String,
    pub status: VerdictStatus,
    pub registry_hash: Option<Hash256>,
    pub sbom_hash: Option<Hash256>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Pass,
    Fail,
}

/// Why a report failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    SignatureAbsent,
    SignatureInvalid,
    UntrustedSigner,
    /// Hash-less SBOMs cannot be verified and are refused outright.
    NaiveSbom,
    ComponentFailures,
}

impl Rejection {
    pub fn message(self) -> &'static str {
        match self {
            Rejection::SignatureAbsent => "SBOM is not signed",
            Rejection::SignatureInvalid => "SBOM signature does not verify",
            Rejection::UntrustedSigner => "SBOM is signed by a key outside the trusted set",
            Rejection::NaiveSbom => "naive-mode SBOM carries no artifact hashes and cannot be verified",
            Rejection::ComponentFailures => "one or more components failed hash verification",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub signature_status: SignatureStatus,
    pub signer: Option<PublicKey>,
    pub verdicts: Vec<ComponentVerdict>,
    pub overall: Overall,
    pub rejection: Option<Rejection>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.overall == Overall::Pass
    }

    pub fn count(&self, status: VerdictStatus) -> usize {
        self.verdicts.iter().filter(|v| v.status == status).count()
    }

    pub fn failing(&self) -> impl Iterator<Item = &ComponentVerdict> {
        self.verdicts.iter().filter(|v| v.status != VerdictStatus::Verified)
    }

    fn refused(signature_status: SignatureStatus, signer: Option<PublicKey>, why: Rejection) -> Self {
        VerificationReport {
            signature_status,
            signer,
            verdicts: Vec::new(),
            overall: Overall::Fail,
            rejection: Some(why),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Upper bound on concurrent provider lookups.
    pub max_in_flight: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { max_in_flight: 8 }
    }
}

pub fn verify(
    doc: &SbomDocument,
    envelope: Option<&SignatureEnvelope>,
    trusted: &HashSet<PublicKey>,
    provider: &(impl ReferenceProvider + ?Sized),
) -> VerificationReport {
    verify_with(doc, envelope, trusted, provider, &VerifyOptions::default())
}

/// Checks the signature first and stops there if it is missing, invalid or
/// from an untrusted key. Verdict order follows the SBOM's component order.
pub fn verify_with(
    doc: &SbomDocument,
    envelope: Option<&SignatureEnvelope>,
    trusted: &HashSet<PublicKey>,
    provider: &(impl ReferenceProvider + ?Sized),
    options: &VerifyOptions,
) -> VerificationReport {
    let Some(env) = envelope else {
        return VerificationReport::refused(SignatureStatus::Absent, None, Rejection::SignatureAbsent);
    };
    let signer = Some(env.signer_pubkey);
    if verify_document_signature(doc, env) != SignatureStatus::Valid {
        return VerificationReport::refused(SignatureStatus::Invalid, signer, Rejection::SignatureInvalid);
    }
    if !trusted.contains(&env.signer_pubkey) {
        return VerificationReport::refused(SignatureStatus::Invalid, signer, Rejection::UntrustedSigner);
    }
    if doc.tool_mode() == ToolMode::Naive {
        return VerificationReport::refused(SignatureStatus::Valid, signer, Rejection::NaiveSbom);
    }
    let verdicts = check_all(doc.components(), provider, options.max_in_flight);
    let all_verified = verdicts.iter().all(|v| v.status == VerdictStatus::Verified);
    VerificationReport {
        signature_status: SignatureStatus::Valid,
        signer,
        verdicts,
        overall: if all_verified { Overall::Pass } else { Overall::Fail },
        rejection: (!all_verified).then_some(Rejection::ComponentFailures),
    }
}

fn check_all(
    components: &[Component],
    provider: &(impl ReferenceProvider + ?Sized),
    max_in_flight: usize,
) -> Vec<ComponentVerdict> {
    let workers = max_in_flight.clamp(1, components.len().max(1));
    if workers == 1 {
        return components.iter().map(|c| check_component(c, provider)).collect();
    }
    let slots: Vec<Mutex<Option<ComponentVerdict>>> = components.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(c) = components.get(i) else { break };
                let verdict = check_component(c, provider);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(verdict);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot filled"))
        .collect()
}

/// Prefers the record for the same artifact file, then one with the same
/// hash, then any record (which then reports the mismatch).
fn select<'a>(records: &'a [RegistryRecord], component: &Component) -> &'a RegistryRecord {
    let by_name = component.artifact_filename().and_then(|f| {
        records
            .iter()
            .find(|r| r.artifact_filename.as_deref() == Some(f))
    });
    by_name
        .or_else(|| records.iter().find(|r| Some(r.artifact_hash) == component.artifact_hash()))
        .unwrap_or(&records[0])
}

pub fn check_component(component: &Component, provider: &(impl ReferenceProvider + ?Sized)) -> ComponentVerdict {
    let mut verdict = ComponentVerdict {
        name: component.name().to_string(),
        version: component.version().to_string(),
        purl: component.purl().to_string(),
        status: VerdictStatus::MissingHash,
        registry_hash: None,
        sbom_hash: component.artifact_hash(),
        detail: None,
    };
    let Some(sbom_hash) = component.artifact_hash() else {
        return verdict;
    };
    let coords = PackageCoords::new(component.ecosystem(), component.name(), component.version());
    match provider.records(&coords) {
        Err(e) => {
            verdict.status = VerdictStatus::ProviderError;
            verdict.detail = Some(e.to_string());
        }
        Ok(records) if records.is_empty() => verdict.status = VerdictStatus::NotInRegistry,
        Ok(records) => {
            let reference = select(&records, component);
            verdict.registry_hash = Some(reference.artifact_hash);
            verdict.status = if reference.artifact_hash == sbom_hash {
                VerdictStatus::Verified
            } else {
                VerdictStatus::HashMismatch
            };
        }
    }
    verdict
}
