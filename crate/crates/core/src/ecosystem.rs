use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Package ecosystems covered by the manifest adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ecosystem {
    Python,
    Javascript,
    CCpp,
    Csharp,
    Php,
    Java,
    Rust,
}

impl Ecosystem {
    pub const ALL: [Ecosystem; 7] = [
        Ecosystem::Python,
        Ecosystem::Javascript,
        Ecosystem::CCpp,
        Ecosystem::Csharp,
        Ecosystem::Php,
        Ecosystem::Java,
        Ecosystem::Rust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ecosystem::Python => "python",
            Ecosystem::Javascript => "javascript",
            Ecosystem::CCpp => "c_cpp",
            Ecosystem::Csharp => "csharp",
            Ecosystem::Php => "php",
            Ecosystem::Java => "java",
            Ecosystem::Rust => "rust",
        }
    }

    /// package-url `type` component.
    pub fn purl_type(self) -> &'static str {
        match self {
            Ecosystem::Python => "pypi",
            Ecosystem::Javascript => "npm",
            Ecosystem::CCpp => "conan",
            Ecosystem::Csharp => "nuget",
            Ecosystem::Php => "composer",
            Ecosystem::Java => "maven",
            Ecosystem::Rust => "cargo",
        }
    }

    pub fn from_purl_type(ty: &str) -> Option<Self> {
        Ecosystem::ALL.into_iter().find(|e| e.purl_type() == ty)
    }

    /// Whether the ecosystem's build tooling re-resolves declared versions
    /// from the central repository, which defeats manifest-only tampering.
    pub fn resolves_from_central_repository(self) -> bool {
        matches!(self, Ecosystem::Java | Ecosystem::Rust)
    }
}

impl fmt::Display for Ecosystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown ecosystem {0:?}")]
pub struct UnknownEcosystem(pub String);

impl FromStr for Ecosystem {
    type Err = UnknownEcosystem;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '+'], "_");
        match norm.as_str() {
            "python" | "pypi" => Ok(Ecosystem::Python),
            "javascript" | "js" | "npm" | "node" => Ok(Ecosystem::Javascript),
            "c_cpp" | "c" | "cpp" | "c__" | "conan" => Ok(Ecosystem::CCpp),
            "csharp" | "c#" | "dotnet" | "nuget" => Ok(Ecosystem::Csharp),
            "php" | "composer" => Ok(Ecosystem::Php),
            "java" | "maven" => Ok(Ecosystem::Java),
            "rust" | "cargo" => Ok(Ecosystem::Rust),
            _ => Err(UnknownEcosystem(s.to_string())),
        }
    }
}

/// Identifies one released package version.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PackageCoords {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
}

impl PackageCoords {
    pub fn new(ecosystem: Ecosystem, name: impl Into<String>, version: impl Into<String>) -> Self {
        PackageCoords {
            ecosystem,
            name: name.into(),
            version: version.into(),
        }
    }
}

impl fmt::Display for PackageCoords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.ecosystem, self.name, self.version)
    }
}
