//! Dotted numeric versions: `N[.N[.N]][-suffix]`.
//!
//! The suffix is carried opaquely. Ordering compares the numeric tuple
//! (missing parts read as zero); on a tie a bare version sorts before any
//! suffixed one and suffixes compare lexicographically.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid version {input:?}: {reason}")]
pub struct VersionError {
    pub input: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    raw: String,
    numbers: Vec<u64>,
    suffix: Option<String>,
}

impl Version {
    pub fn parse(input: &str) -> Result<Self, VersionError> {
        let err = |reason| VersionError {
            input: input.to_string(),
            reason,
        };
        if input.is_empty() {
            return Err(err("empty"));
        }
        if input.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(err("contains whitespace"));
        }
        let (base, suffix) = match input.split_once('-') {
            Some((_, "")) => return Err(err("empty suffix")),
            Some((base, suffix)) => (base, Some(suffix.to_string())),
            None => (input, None),
        };
        let mut numbers = Vec::with_capacity(3);
        for part in base.split('.') {
            if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err("components must be decimal numbers"));
            }
            numbers.push(part.parse::<u64>().map_err(|_| err("component overflows"))?);
        }
        if numbers.len() > 3 {
            return Err(err("at most three numeric components"));
        }
        Ok(Version {
            raw: input.to_string(),
            numbers,
            suffix,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }

    pub fn numbers(&self) -> &[u64] {
        &self.numbers
    }

    pub fn suffix(&self) -> Option<&str> {
        self.suffix.as_deref()
    }

    fn padded(&self) -> [u64; 3] {
        let mut out = [0u64; 3];
        out[..self.numbers.len()].copy_from_slice(&self.numbers);
        out
    }

    /// Precedence order used for advisory ranges. `1.9` and `1.9.0` tie.
    pub fn cmp_precedence(&self, other: &Version) -> Ordering {
        self.padded()
            .cmp(&other.padded())
            .then_with(|| match (&self.suffix, &other.suffix) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.cmp(b),
            })
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl std::str::FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Version::parse(s)
    }
}
