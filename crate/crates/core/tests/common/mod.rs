//! Fixture helpers shared by the integration suites.
#![allow(dead_code)]

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use sbomguard::generator::GenerationOptions;
use sbomguard::registry::LocalRegistry;
use sbomguard::{Ecosystem, Keypair, PublicKey};
use tempfile::TempDir;
use uuid::Uuid;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Fixture directories paired with their ecosystems: the six tamperable
/// ones first, then the two that resolve from a central repository.
pub const TAMPERABLE: &[(&str, Ecosystem)] = &[
    ("python", Ecosystem::Python),
    ("javascript", Ecosystem::Javascript),
    ("c", Ecosystem::CCpp),
    ("cpp", Ecosystem::CCpp),
    ("csharp", Ecosystem::Csharp),
    ("php", Ecosystem::Php),
];

pub const RESOLVED_CENTRALLY: &[(&str, Ecosystem)] = &[("java", Ecosystem::Java), ("rust", Ecosystem::Rust)];

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            fs::copy(entry.path(), &dest).unwrap();
        }
    }
}

/// A scratch copy of one fixture project; the original stays untouched.
pub fn project_copy(name: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("projects").join(name), dir.path());
    dir
}

pub fn registry() -> LocalRegistry {
    LocalRegistry::open(&fixtures().join("registry")).unwrap()
}

pub fn fixed_options() -> GenerationOptions {
    GenerationOptions::fixed(Utc.timestamp_opt(1_700_000_000, 0).unwrap(), Uuid::nil())
}

pub fn signer() -> Keypair {
    Keypair::from_seed([7; 32])
}

pub fn trusting(key: &Keypair) -> HashSet<PublicKey> {
    HashSet::from([key.public_key()])
}

pub mod strategies {
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use sbomguard::model::{Component, SbomDocument, ToolMode};
    use sbomguard::{Ecosystem, Hash256};
    use uuid::Uuid;

    pub fn ecosystem() -> impl Strategy<Value = Ecosystem> {
        proptest::sample::select(Ecosystem::ALL.to_vec())
    }

    pub fn version() -> impl Strategy<Value = String> {
        (0u32..40, 0u32..40, proptest::option::of(0u32..40), proptest::option::of("[a-z]{1,5}")).prop_map(
            |(a, b, c, s)| {
                let mut v = format!("{a}.{b}");
                if let Some(c) = c {
                    v.push_str(&format!(".{c}"));
                }
                if let Some(s) = s {
                    v.push('-');
                    v.push_str(&s);
                }
                v
            },
        )
    }

    pub fn component(secure: bool) -> impl Strategy<Value = Component> {
        (ecosystem(), "[a-z][a-z0-9-]{0,12}", version(), any::<[u8; 32]>(), "[a-z]{1,8}").prop_map(
            move |(eco, name, ver, hash, file)| {
                let c = Component::new(eco, name, ver).unwrap();
                if secure {
                    c.with_artifact(Hash256::from_bytes(hash), Some(format!("{file}.tgz")))
                } else {
                    c
                }
            },
        )
    }

    /// Documents of up to `max` components with unique `(name, version)`.
    pub fn document(max: usize) -> impl Strategy<Value = SbomDocument> {
        (any::<bool>(), any::<u128>(), 0i64..4_000_000_000)
            .prop_flat_map(move |(secure, serial, ts)| {
                (
                    Just((secure, serial, ts)),
                    proptest::collection::vec(component(secure), 0..=max),
                )
            })
            .prop_map(|((secure, serial, ts), comps)| {
                let mut seen = std::collections::HashSet::new();
                let comps: Vec<Component> = comps
                    .into_iter()
                    .filter(|c| seen.insert((c.name().to_string(), c.version().to_string())))
                    .collect();
                let mode = if secure { ToolMode::Secure } else { ToolMode::Naive };
                SbomDocument::new(
                    Uuid::from_u128(serial),
                    Utc.timestamp_opt(ts, 0).unwrap(),
                    "proptest",
                    mode,
                    comps,
                )
                .unwrap()
            })
    }
}
