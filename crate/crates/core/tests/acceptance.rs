//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any failure.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use common::{fixed_options, project_copy, registry, signer, trusting, RESOLVED_CENTRALLY, TAMPERABLE};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sbomguard::demo::{demo_attack_pipeline, poco_advisories, run_poco_demo, DemoContext, TamperSpec};
use sbomguard::feasibility::{estimate_storage, estimate_verification_time, FeasibilityInputs};
use sbomguard::generator::generate_naive;
use sbomguard::ledger::{
    audit_dir, DualLedger, IdentityTransaction, LedgerConfig, LedgerError, LibraryName, LibraryTransaction,
    PackedVersion, IDENTITY_CHAIN_FILE, LIBRARY_CHAIN_FILE,
};
use sbomguard::manifest::{parse_project, tamper_version, ManifestError, TamperScope};
use sbomguard::model::{canonical_serialize, sign_document_with, Component, SbomDocument, ToolMode};
use sbomguard::verifier::{verify, Overall, VerdictStatus};
use sbomguard::{Ecosystem, Hash256, Keypair};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

fn random_version(rng: &mut StdRng) -> String {
    format!("{}.{}.{}", rng.gen_range(0..50), rng.gen_range(0..50), rng.gen_range(0..50))
}

fn random_name(rng: &mut StdRng, max: usize) -> String {
    let len = rng.gen_range(1..=max);
    (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn byte_layout() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..1000 {
        let k = Keypair::from_seed(rng.gen());
        let name = LibraryName::new(&random_name(&mut rng, 32)).map_err(|e| e.to_string())?;
        let id = if rng.gen() {
            IdentityTransaction::claim(&k, rng.gen(), name.clone())
        } else {
            let to = Keypair::from_seed(rng.gen()).public_key();
            IdentityTransaction::transfer(&k, rng.gen(), to, name.clone(), Hash256::from_bytes(rng.gen()))
        };
        let v = PackedVersion::new(rng.gen(), rng.gen(), rng.gen());
        let lib = LibraryTransaction::signed(&k, rng.gen(), name, v, Hash256::from_bytes(rng.gen()));
        ensure(id.encode().len() == 296, || "identity width".into())?;
        ensure(lib.encode().len() == 208, || "library width".into())?;
    }
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("1000 identity txs = 296 B, 1000 library txs = 208 B ({took:.0?})"))
}

fn storage() -> Outcome {
    let s = estimate_storage(&FeasibilityInputs::default());
    ensure((s.identity_gib - 27.57).abs() <= 0.01, || format!("identity {}", s.identity_gib))?;
    ensure((s.library_gib - 550.15).abs() <= 0.01, || format!("library {}", s.library_gib))?;
    Ok(format!("identity {:.2} GiB, library {:.2} GiB", s.identity_gib, s.library_gib))
}

fn verification_time() -> Outcome {
    let t = estimate_verification_time(&FeasibilityInputs::default());
    ensure(t == 2.0, || format!("{t} s"))?;
    Ok(format!("1000 deps x (0.5 + 1.5) ms = {t} s"))
}

fn attack_reproduction() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(4);
    let mut edits = 0;
    for &(fixture, eco) in TAMPERABLE {
        let dir = project_copy(fixture);
        let project = parse_project(dir.path(), eco).map_err(|e| e.to_string())?;
        for dep in project.deps() {
            for _ in 0..5 {
                let to = random_version(&mut rng);
                let edited = tamper_version(&project, &dep.name, &to, TamperScope::AllLocations)
                    .map_err(|e| format!("{fixture}/{}: {e}", dep.name))?;
                let sbom = generate_naive(&edited, &fixed_options()).map_err(|e| e.to_string())?;
                let shown = sbom.components().iter().find(|c| c.name() == dep.name).map(|c| c.version());
                ensure(shown == Some(to.as_str()), || format!("{fixture}/{} shows {shown:?}, wanted {to}", dep.name))?;
                edits += 1;
            }
        }
    }
    for &(fixture, eco) in RESOLVED_CENTRALLY {
        let dir = project_copy(fixture);
        let project = parse_project(dir.path(), eco).map_err(|e| e.to_string())?;
        let r = tamper_version(&project, &project.deps()[0].name, "9.9.9", TamperScope::AllLocations);
        ensure(matches!(r, Err(ManifestError::UnsupportedEcosystem(_))), || format!("{fixture} was tamperable"))?;
    }
    let took = within(Duration::from_secs(10), start)?;
    Ok(format!("{edits} edits across 6 fixtures all displayed; java and rust refused ({took:.0?})"))
}

fn defense_completeness() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    let reg = registry();
    let advisories = poco_advisories();
    let key = signer();
    let (mut tampered_total, mut clean_total) = (0, 0);
    const TRIALS: usize = 200;
    for trial in 0..TRIALS {
        let (fixture, eco) = TAMPERABLE[rng.gen_range(0..TAMPERABLE.len())];
        let dir = project_copy(fixture);
        let deps = parse_project(dir.path(), eco).map_err(|e| e.to_string())?.deps().to_vec();
        let mut expected = BTreeSet::new();
        let mut tampers = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let dep = &deps[rng.gen_range(0..deps.len())];
            let to = random_version(&mut rng);
            if to != dep.version && expected.insert(dep.name.clone()) {
                tampers.push(TamperSpec::new(dep.name.clone(), to));
            }
        }
        let ctx = DemoContext {
            source: &reg,
            provider: &reg,
            advisories: &advisories,
            signer: &key,
            options: fixed_options(),
        };
        let out = demo_attack_pipeline(dir.path(), eco, &tampers, &ctx).map_err(|e| e.to_string())?;
        let flagged: BTreeSet<String> = out.secure_report.failing().map(|v| v.name.clone()).collect();
        ensure(flagged == expected, || format!("trial {trial} ({fixture}): flagged {flagged:?}, tampered {expected:?}"))?;
        let kinds_ok = out
            .secure_report
            .failing()
            .all(|v| matches!(v.status, VerdictStatus::HashMismatch | VerdictStatus::NotInRegistry));
        ensure(kinds_ok, || format!("trial {trial}: unexpected failure kind"))?;
        tampered_total += expected.len();
        clean_total += out.secure_report.count(VerdictStatus::Verified);
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{TRIALS} trials: {tampered_total}/{tampered_total} tampered detected, 0/{clean_total} false positives ({took:.1?})"
    ))
}

fn poco_scenario() -> Outcome {
    let run = || -> Result<_, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let demo = run_poco_demo(dir.path()).map_err(|e| e.to_string())?;
        Ok((demo.control_summary(), demo.attack_summary()))
    };
    let (control, attack) = run()?;
    ensure(control.advisory_hits == 1, || format!("control hits {}", control.advisory_hits))?;
    ensure(control.secure_overall == Overall::Pass, || "control secure run failed".into())?;
    ensure(attack.advisory_hits == 0, || format!("attack hits {}", attack.advisory_hits))?;
    ensure(attack.secure_overall == Overall::Fail && attack.hash_mismatches == 1, || {
        format!("attack: {:?} with {} mismatches", attack.secure_overall, attack.hash_mismatches)
    })?;
    ensure(run()? == (control.clone(), attack.clone()), || "second run differs".into())?;
    Ok(format!(
        "control {}: {} hit, PASS; tampered {}: {} hits, FAIL with {} hash mismatch; deterministic",
        control.sbom_version, control.advisory_hits, attack.sbom_version, attack.advisory_hits, attack.hash_mismatches
    ))
}

fn random_secure_doc(rng: &mut StdRng) -> SbomDocument {
    let mut names = HashSet::new();
    let comps: Vec<Component> = (0..rng.gen_range(1..10))
        .filter_map(|_| {
            let name = random_name(rng, 10);
            names.insert(name.clone()).then(|| {
                Component::new(Ecosystem::ALL[rng.gen_range(0..7)], name, random_version(rng))
                    .unwrap()
                    .with_artifact(Hash256::from_bytes(rng.gen()), Some("a.tgz".into()))
            })
        })
        .collect();
    let ts = Utc.timestamp_opt(rng.gen_range(0..4_000_000_000), 0).unwrap();
    SbomDocument::new(uuid::Uuid::from_u128(rng.gen()), ts, "acceptance", ToolMode::Secure, comps).unwrap()
}

fn fail_closed() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let key = signer();
    let trusted = trusting(&key);
    let reg = registry();
    let mut attempts = 0;
    for _ in 0..300 {
        let doc = random_secure_doc(&mut rng);
        let unsigned = verify(&doc, None, &trusted, &reg);
        let wrong = verify(&doc, Some(&sign_document_with(&doc, &Keypair::from_seed(rng.gen()))), &trusted, &reg);
        let env = sign_document_with(&doc, &key);
        let mut v: serde_json::Value = serde_json::from_slice(&canonical_serialize(&doc)).unwrap();
        v["metadata"]["tools"][0]["name"] = serde_json::Value::String(random_name(&mut rng, 12) + "-x");
        let mutated = SbomDocument::from_json(&serde_json::to_vec(&v).unwrap()).map_err(|e| e.to_string())?;
        let after = verify(&mutated, Some(&env), &trusted, &reg);
        for r in [&unsigned, &wrong, &after] {
            ensure(r.overall == Overall::Fail, || format!("accepted: {r:?}"))?;
            attempts += 1;
        }
    }
    Ok(format!("{attempts} unsigned, wrong-key and post-signature-edited SBOMs, 0 accepted"))
}

fn ledger_safety() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let keys: Vec<Keypair> = (1..=3u8).map(|i| Keypair::from_seed([i; 32])).collect();
    let names = ["poco", "zlib", "openssl"];
    let mut refused = [0usize; 4];
    let mut owner_queries = 0;
    for _ in 0..40 {
        let mut ledger = DualLedger::new(LedgerConfig::instant());
        let mut owner: [Option<usize>; 3] = [None; 3];
        let mut versions: HashSet<(usize, u16)> = HashSet::new();
        let mut events: Vec<(u64, usize, usize)> = Vec::new();
        let mut ts = 10;
        for _ in 0..60 {
            ts += rng.gen_range(1..4);
            let (k, n) = (rng.gen_range(0..3), rng.gen_range(0..3));
            match rng.gen_range(0..4) {
                0 => {
                    let r = ledger.claim_ownership_at(&keys[k], names[n], ts);
                    if owner[n].is_some() {
                        ensure(matches!(r, Err(LedgerError::AlreadyOwned { .. })), || "double claim accepted".into())?;
                        refused[0] += 1;
                    } else {
                        r.map_err(|e| e.to_string())?;
                        owner[n] = Some(k);
                        events.push((ts, n, k));
                    }
                }
                1 => {
                    let minor = rng.gen_range(0..4);
                    let v = format!("1.{minor}.0");
                    let r = ledger.register_library_at(&keys[k], names[n], &v, Hash256::digest(v.as_bytes()), ts);
                    if owner[n] != Some(k) {
                        ensure(r.is_err(), || "non-owner registration accepted".into())?;
                        refused[1] += 1;
                    } else if versions.contains(&(n, minor)) {
                        ensure(matches!(r, Err(LedgerError::DuplicateVersion { .. })), || "duplicate accepted".into())?;
                        refused[3] += 1;
                    } else {
                        r.map_err(|e| e.to_string())?;
                        versions.insert((n, minor));
                    }
                }
                2 => {
                    let to = rng.gen_range(0..3);
                    let r = ledger.transfer_ownership_at(&keys[k], keys[to].public_key(), names[n], ts);
                    if owner[n] != Some(k) {
                        ensure(r.is_err(), || "non-owner transfer accepted".into())?;
                        refused[2] += 1;
                    } else {
                        r.map_err(|e| e.to_string())?;
                        owner[n] = Some(to);
                        events.push((ts, n, to));
                    }
                }
                _ => {
                    let _ = ledger.seal_all();
                }
            }
        }
        let _ = ledger.seal_all();
        for (n, name) in names.iter().enumerate() {
            for t in 0..=ts + 1 {
                let want = events
                    .iter()
                    .rfind(|(at, en, _)| *en == n && *at <= t)
                    .map(|(_, _, k)| keys[*k].public_key());
                ensure(ledger.owner_at(name, t) == want, || format!("owner_at({name}, {t}) disagrees with replay"))?;
                owner_queries += 1;
            }
        }
    }
    ensure(refused.iter().all(|&c| c > 0), || format!("some attack never exercised: {refused:?}"))?;

    // Bit flips in persisted chains.
    let mut ledger = DualLedger::new(LedgerConfig::instant());
    let mut ts = 100;
    for (i, name) in names.iter().enumerate() {
        ts += 1;
        ledger.claim_ownership_at(&keys[0], name, ts).map_err(|e| e.to_string())?;
        for minor in 0..3 {
            ts += 1;
            let v = format!("{i}.{minor}.0");
            ledger.register_library_at(&keys[0], name, &v, Hash256::digest(v.as_bytes()), ts).map_err(|e| e.to_string())?;
        }
        ledger.seal_all().map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    ledger.save(dir.path()).map_err(|e| e.to_string())?;
    let mut flips = 0;
    for file in [IDENTITY_CHAIN_FILE, LIBRARY_CHAIN_FILE] {
        let path = dir.path().join(file);
        let original = std::fs::read(&path).map_err(|e| e.to_string())?;
        for _ in 0..300 {
            let bit = rng.gen_range(0..original.len() * 8);
            let mut bytes = original.clone();
            bytes[bit / 8] ^= 1 << (bit % 8);
            std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
            let report = audit_dir(dir.path()).map_err(|e| e.to_string())?;
            ensure(!report.ok(), || format!("flip of bit {bit} in {file} not caught"))?;
            flips += 1;
        }
        std::fs::write(&path, &original).map_err(|e| e.to_string())?;
    }
    Ok(format!(
        "refused {} double claims, {} non-owner registrations, {} non-owner transfers, {} duplicates; \
         {owner_queries} owner_at queries match replay; {flips}/{flips} bit flips caught",
        refused[0], refused[1], refused[2], refused[3]
    ))
}

fn ledger_verification_timing() -> Outcome {
    let mut ledger = DualLedger::new(LedgerConfig::instant());
    let owner = Keypair::from_seed([42; 32]);
    let mut comps = Vec::with_capacity(1000);
    for i in 0..1000u64 {
        let name = format!("lib-{i:04}");
        let hash = Hash256::digest(name.as_bytes());
        ledger.claim_ownership_at(&owner, &name, 2 * i + 1).map_err(|e| e.to_string())?;
        ledger.register_library_at(&owner, &name, "1.0.0", hash, 2 * i + 2).map_err(|e| e.to_string())?;
        comps.push(Component::new(Ecosystem::CCpp, name, "1.0.0").unwrap().with_artifact(hash, None));
    }
    ledger.seal_all().map_err(|e| e.to_string())?;
    let doc = SbomDocument::new(uuid::Uuid::nil(), Utc::now(), "acceptance", ToolMode::Secure, comps).unwrap();
    let key = signer();
    let env = sign_document_with(&doc, &key);
    let trusted = trusting(&key);
    let start = Instant::now();
    let report = verify(&doc, Some(&env), &trusted, &ledger);
    let took = start.elapsed();
    ensure(report.passed() && report.count(VerdictStatus::Verified) == 1000, || "verification failed".into())?;
    ensure(took < Duration::from_secs(2), || format!("measured {took:?}, estimate 2 s"))?;
    Ok(format!("1000 components verified against the ledger in {:.1} ms (estimate 2000 ms)", took.as_secs_f64() * 1e3))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("transaction byte layout", byte_layout),
        ("storage arithmetic", storage),
        ("verification-time arithmetic", verification_time),
        ("attack reproduction", attack_reproduction),
        ("defense completeness", defense_completeness),
        ("poco scenario", poco_scenario),
        ("fail-closed consumption", fail_closed),
        ("ledger safety", ledger_safety),
        ("ledger verification timing", ledger_verification_timing),
    ];
    let mut failed = 0;
    for (i, (label, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {label}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {label}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
