//! Version-only advisory matching, the way SBOM consumers typically do it.
//! It trusts whatever version the SBOM claims, which is what the tampering
//! attack exploits.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ecosystem::Ecosystem;
use crate::model::SbomDocument;
use crate::registry::names_equal;
use crate::version::{Version, VersionError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Advisory {
    pub ecosystem: Ecosystem,
    pub name: String,
    /// First fixed version: every version strictly below it is affected.
    pub affected_below: String,
    pub advisory_id: String,
    pub summary: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AdvisoryError {
    #[error("advisory database: {0}")]
    Json(#[from] serde_json::Error),
    #[error("advisory {advisory_id}: {source}")]
    AffectedBelow {
        advisory_id: String,
        #[source]
        source: VersionError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn parse_advisories(bytes: &[u8]) -> Result<Vec<Advisory>, AdvisoryError> {
    let list: Vec<Advisory> = serde_json::from_slice(bytes)?;
    for a in &list {
        Version::parse(&a.affected_below).map_err(|source| AdvisoryError::AffectedBelow {
            advisory_id: a.advisory_id.clone(),
            source,
        })?;
    }
    Ok(list)
}

pub fn load_advisories(path: &Path) -> Result<Vec<Advisory>, AdvisoryError> {
    let bytes = std::fs::read(path).map_err(|source| AdvisoryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_advisories(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdvisoryHit {
    pub name: String,
    pub version: String,
    pub purl: String,
    pub advisory_id: String,
    pub affected_below: String,
    pub summary: String,
}

/// A component whose version could not be compared.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionProblem {
    pub name: String,
    pub version: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AdvisoryReport {
    pub hits: Vec<AdvisoryHit>,
    pub problems: Vec<VersionProblem>,
}

/// Pairs each component with every advisory for the same package whose
/// threshold lies above the component's claimed version.
pub fn match_advisories(doc: &SbomDocument, advisories: &[Advisory]) -> AdvisoryReport {
    let mut report = AdvisoryReport::default();
    let thresholds: Vec<Option<Version>> = advisories
        .iter()
        .map(|a| Version::parse(&a.affected_below).ok())
        .collect();
    for c in doc.components() {
        let relevant: Vec<(&Advisory, &Option<Version>)> = advisories
            .iter()
            .zip(&thresholds)
            .filter(|(a, _)| a.ecosystem == c.ecosystem() && names_equal(a.ecosystem, &a.name, c.name()))
            .collect();
        if relevant.is_empty() {
            continue;
        }
        let version = match Version::parse(c.version()) {
            Ok(v) => v,
            Err(e) => {
                report.problems.push(VersionProblem {
                    name: c.name().to_string(),
                    version: c.version().to_string(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        for (a, threshold) in relevant {
            let Some(threshold) = threshold else { continue };
            if version.cmp_precedence(threshold) == Ordering::Less {
                report.hits.push(AdvisoryHit {
                    name: c.name().to_string(),
                    version: c.version().to_string(),
                    purl: c.purl().to_string(),
                    advisory_id: a.advisory_id.clone(),
                    affected_below: a.affected_below.clone(),
                    summary: a.summary.clone(),
                });
            }
        }
    }
    report
}
