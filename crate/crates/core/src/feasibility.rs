//! Back-of-envelope sizing for the dual ledger. Storage is reported in GiB
//! (2^30 bytes), the unit that reproduces the published figures.

use serde::Serialize;

use crate::ledger::{IDENTITY_TX_LEN, LIBRARY_TX_LEN};

/// Median confirmation time assumed for a registration: 40 minutes.
pub const CONFIRMATION_DELAY_MS: u64 = 40 * 60 * 1000;

const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityInputs {
    pub developers: u64,
    pub repositories: u64,
    pub avg_versions_per_library: u64,
    pub identity_record_bytes: u64,
    pub library_record_bytes: u64,
    pub per_identity_check_ms: f64,
    pub per_library_check_ms: f64,
    pub deps_per_app: u64,
}

impl Default for FeasibilityInputs {
    /// Public-forge scale: 100M developers, 284M repositories, 10 versions
    /// each, and a 1000-dependency application checked at 0.5 + 1.5 ms.
    fn default() -> Self {
        FeasibilityInputs {
            developers: 100_000_000,
            repositories: 284_000_000,
            avg_versions_per_library: 10,
            identity_record_bytes: IDENTITY_TX_LEN as u64,
            library_record_bytes: LIBRARY_TX_LEN as u64,
            per_identity_check_ms: 0.5,
            per_library_check_ms: 1.5,
            deps_per_app: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StorageEstimate {
    pub identity_gib: f64,
    pub library_gib: f64,
}

pub fn estimate_storage(inputs: &FeasibilityInputs) -> StorageEstimate {
    let identity = inputs.developers as f64 * inputs.identity_record_bytes as f64;
    let library = inputs.repositories as f64 * inputs.avg_versions_per_library as f64 * inputs.library_record_bytes as f64;
    StorageEstimate {
        identity_gib: identity / GIB,
        library_gib: library / GIB,
    }
}

/// Seconds to check every dependency of one application.
pub fn estimate_verification_time(inputs: &FeasibilityInputs) -> f64 {
    inputs.deps_per_app as f64 * (inputs.per_identity_check_ms + inputs.per_library_check_ms) / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegistrationLatency {
    pub confirmation_delay_ms: u64,
    pub confirmation_delay_s: u64,
    pub confirmation_delay_min: u64,
    pub basis: &'static str,
}

pub fn registration_latency_note() -> RegistrationLatency {
    RegistrationLatency {
        confirmation_delay_ms: CONFIRMATION_DELAY_MS,
        confirmation_delay_s: CONFIRMATION_DELAY_MS / 1000,
        confirmation_delay_min: CONFIRMATION_DELAY_MS / 60_000,
        basis: "median block confirmation time of a public proof-of-work chain",
    }
}
