mod common;

use common::{fixed_options, project_copy, RESOLVED_CENTRALLY, TAMPERABLE};
use proptest::prelude::*;
use sbomguard::generator::generate_naive;
use sbomguard::manifest::{parse_project, tamper_version, tamperability_table, ManifestError, TamperScope};

fn new_version() -> impl Strategy<Value = String> {
    (0u32..300, 0u32..60, 0u32..60).prop_map(|(a, b, c)| format!("{a}.{b}.{c}"))
}

/// Bytes that may differ between an original and a tampered file.
fn is_version_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'.' || b == b'-'
}

/// The file with every run of version-like bytes collapsed to one marker.
fn skeleton(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for &b in bytes {
        if !is_version_byte(b) {
            out.push(b);
        } else if out.last() != Some(&0) {
            out.push(0);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tamper_is_local_complete_and_reversible(
        fixture in 0..TAMPERABLE.len(),
        pick in any::<prop::sample::Index>(),
        to in new_version(),
    ) {
        let (name, eco) = TAMPERABLE[fixture];
        let dir = project_copy(name);
        let project = parse_project(dir.path(), eco).unwrap();
        let dep = pick.get(project.deps()).clone();
        prop_assume!(dep.version != to);

        let edited = tamper_version(&project, &dep.name, &to, TamperScope::AllLocations).unwrap();
        prop_assert!(edited.conflicts().is_empty());
        prop_assert_eq!(&edited.dep(&dep.name).unwrap().version, &to);
        for other in project.deps().iter().filter(|d| d.name != dep.name) {
            prop_assert_eq!(edited.dep(&other.name), Some(other));
        }
        // Only version characters change, and only inside the files.
        for (before, after) in project.manifest_files().iter().zip(edited.manifest_files()) {
            prop_assert_eq!(&before.path, &after.path);
            prop_assert_eq!(skeleton(&before.bytes), skeleton(&after.bytes));
        }
        // Written to disk, a fresh parse and the naive SBOM both show the lie.
        edited.write_files().unwrap();
        let reparsed = parse_project(dir.path(), eco).unwrap();
        let sbom = generate_naive(&reparsed, &fixed_options()).unwrap();
        let shown = sbom.components().iter().find(|c| c.name() == dep.name).unwrap();
        prop_assert_eq!(shown.version(), to.as_str());

        let restored = tamper_version(&reparsed, &dep.name, &dep.version, TamperScope::AllLocations).unwrap();
        for (orig, back) in project.manifest_files().iter().zip(restored.manifest_files()) {
            prop_assert_eq!(&orig.bytes, &back.bytes, "{}", orig.path.display());
        }
    }
}

#[test]
fn every_dependency_of_every_tamperable_fixture() {
    for &(name, eco) in TAMPERABLE {
        let dir = project_copy(name);
        let project = parse_project(dir.path(), eco).unwrap();
        assert!(!project.deps().is_empty(), "{name}");
        for dep in project.deps() {
            let edited = tamper_version(&project, &dep.name, "99.0.1", TamperScope::AllLocations).unwrap();
            let sbom = generate_naive(&edited, &fixed_options()).unwrap();
            let c = sbom.components().iter().find(|c| c.name() == dep.name).unwrap();
            assert_eq!(c.version(), "99.0.1", "{name}/{}", dep.name);
        }
    }
}

#[test]
fn centrally_resolved_fixtures_refuse() {
    for &(name, eco) in RESOLVED_CENTRALLY {
        let dir = project_copy(name);
        let project = parse_project(dir.path(), eco).unwrap();
        let dep = &project.deps()[0];
        let err = tamper_version(&project, &dep.name, "99.0.0", TamperScope::AllLocations).unwrap_err();
        assert!(matches!(err, ManifestError::UnsupportedEcosystem(e) if e == eco), "{name}: {err}");
    }
    let table = tamperability_table();
    assert_eq!(table.iter().filter(|r| r.tamperable).count(), 6);
    assert_eq!(table.iter().filter(|r| !r.tamperable).count(), 2);
}

#[test]
fn manifest_only_scope_leaves_lock_disagreeing() {
    let dir = project_copy("javascript");
    let project = parse_project(dir.path(), sbomguard::Ecosystem::Javascript).unwrap();
    let edited = tamper_version(&project, "lodash", "4.17.21", TamperScope::ManifestOnly).unwrap();
    // The lock still wins, so the more authoritative file keeps the truth.
    assert_eq!(edited.dep("lodash").unwrap().version, project.dep("lodash").unwrap().version);
    assert!(edited.conflicts().iter().any(|c| c.name == "lodash"));
}
