use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbomguard"))
        .args(args)
        .current_dir(dir)
        .env_remove("SBOMGUARD_REGISTRY")
        .env_remove("SBOMGUARD_REGISTRY_URL")
        .env_remove("SBOMGUARD_LEDGER_DIR")
        .env_remove("SBOMGUARD_TRUSTED_KEYS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let target = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &target);
        } else {
            fs::copy(e.path(), target).unwrap();
        }
    }
}

/// Temp dir holding a copy of the python fixture project, a signing key and
/// a trust file naming that key.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join("projects/python"), &dir.path().join("proj"));
    let out = bin(dir.path(), &["--json", "keygen", "--out", "key.json"]);
    assert_eq!(code(&out), 0);
    let pk = json(&out)["public_key"].as_str().unwrap().to_string();
    fs::write(dir.path().join("trusted.txt"), format!("# build key\n{pk}\n")).unwrap();
    dir
}

fn registry() -> String {
    fixtures().join("registry").to_string_lossy().into_owned()
}

fn pin_generate_sign(dir: &Path, sbom: &str) {
    let reg = registry();
    assert_eq!(code(&bin(dir, &["pin", "proj", "--registry", &reg])), 0);
    assert_eq!(code(&bin(dir, &["generate", "proj", "--mode", "secure", "--out", sbom])), 0);
    assert_eq!(code(&bin(dir, &["sign", sbom, "--key", "key.json"])), 0);
}

#[test]
fn signed_secure_sbom_verifies() {
    let dir = workspace();
    let d = dir.path();
    pin_generate_sign(d, "app.sbom.json");
    assert!(d.join("app.sbom.sig").exists());
    let out = bin(d, &["--json", "verify", "app.sbom.json", "--trusted", "trusted.txt", "--registry", &registry()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let report = json(&out);
    assert_eq!(report["overall"], "pass");
    assert_eq!(report["verdicts"].as_array().unwrap().len(), 5);
}

#[test]
fn unsigned_sbom_exits_3() {
    let dir = workspace();
    let d = dir.path();
    let reg = registry();
    bin(d, &["pin", "proj", "--registry", &reg]);
    bin(d, &["generate", "proj", "--mode", "secure", "--out", "app.sbom.json"]);
    let out = bin(d, &["verify", "app.sbom.json", "--trusted", "trusted.txt", "--registry", &reg]);
    assert_eq!(code(&out), 3);
}

#[test]
fn untrusted_signer_exits_3() {
    let dir = workspace();
    let d = dir.path();
    pin_generate_sign(d, "app.sbom.json");
    fs::write(d.join("other.txt"), "").unwrap();
    let out = bin(d, &["verify", "app.sbom.json", "--trusted", "other.txt", "--registry", &registry()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn tampered_manifest_exits_4() {
    let dir = workspace();
    let d = dir.path();
    let reg = registry();
    assert_eq!(code(&bin(d, &["pin", "proj", "--registry", &reg])), 0);
    assert_eq!(code(&bin(d, &["tamper", "proj", "--dep", "idna", "--to", "3.6"])), 0);
    bin(d, &["generate", "proj", "--mode", "secure", "--out", "app.sbom.json"]);
    bin(d, &["sign", "app.sbom.json", "--key", "key.json"]);
    let out = bin(d, &["--json", "verify", "app.sbom.json", "--trusted", "trusted.txt", "--registry", &reg]);
    assert_eq!(code(&out), 4);
    let flagged: Vec<_> = json(&out)["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v["status"] == "hash_mismatch")
        .map(|v| v["name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(flagged, ["idna"]);
}

#[test]
fn naive_sbom_exits_4() {
    let dir = workspace();
    let d = dir.path();
    bin(d, &["generate", "proj", "--mode", "naive", "--out", "n.sbom.json"]);
    bin(d, &["sign", "n.sbom.json", "--key", "key.json"]);
    let out = bin(d, &["verify", "n.sbom.json", "--trusted", "trusted.txt", "--registry", &registry()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn unreachable_index_exits_6() {
    let dir = workspace();
    let d = dir.path();
    pin_generate_sign(d, "app.sbom.json");
    let out = bin(
        d,
        &["verify", "app.sbom.json", "--trusted", "trusted.txt", "--registry-url", "http://127.0.0.1:9"],
    );
    assert_eq!(code(&out), 6, "{}", stdout(&out));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&bin(dir.path(), &["generate"])), 2);
    assert_eq!(code(&bin(dir.path(), &["no-such-command"])), 2);
}

#[test]
fn ledger_flow_and_bit_flip() {
    let dir = workspace();
    let d = dir.path();
    pin_generate_sign(d, "app.sbom.json");
    let sbom: Value = serde_json::from_slice(&fs::read(d.join("app.sbom.json")).unwrap()).unwrap();
    for c in sbom["components"].as_array().unwrap() {
        let name = c["name"].as_str().unwrap();
        let version = c["version"].as_str().unwrap();
        let hash = c["hashes"][0]["content"].as_str().unwrap();
        assert_eq!(code(&bin(d, &["ledger", "--dir", "led", "claim", "--key", "key.json", "--name", name])), 0);
        let out = bin(
            d,
            &["ledger", "--dir", "led", "register", "--key", "key.json", "--name", name, "--version", version, "--hash", hash],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = bin(d, &["--json", "ledger", "--dir", "led", "seal", "--confirmation-delay-ms", "0"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["accepted"], 10);

    let out = bin(d, &["verify", "app.sbom.json", "--trusted", "trusted.txt", "--ledger", "--ledger-dir", "led"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = bin(d, &["--json", "ledger", "--dir", "led", "query", "--name", "idna", "--version", "3.4"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["proof"]["owner"].is_string());
    assert_eq!(code(&bin(d, &["ledger", "--dir", "led", "audit"])), 0);

    // Flip one bit inside the library chain's only block.
    let path = d.join("led/library.chain");
    let mut bytes = fs::read(&path).unwrap();
    let at = bytes.len() - 5;
    bytes[at] ^= 0x10;
    fs::write(&path, bytes).unwrap();

    let out = bin(d, &["--json", "ledger", "--dir", "led", "audit"]);
    assert_eq!(code(&out), 5);
    let report = json(&out);
    let findings = report["findings"].as_array().unwrap();
    assert!(!findings.is_empty());
    assert!(findings.iter().all(|f| f["chain"] == "library" && f["height"] == 0), "{report}");
    let text = bin(d, &["ledger", "--dir", "led", "audit"]);
    assert!(stdout(&text).contains("library block 0"));

    let out = bin(d, &["verify", "app.sbom.json", "--trusted", "trusted.txt", "--ledger", "--ledger-dir", "led"]);
    assert_eq!(code(&out), 5);
    assert_eq!(code(&bin(d, &["ledger", "--dir", "led", "query", "--name", "idna", "--version", "3.4"])), 5);
}

#[test]
fn ledger_rule_violation_exits_1() {
    let dir = workspace();
    let d = dir.path();
    bin(d, &["keygen", "--out", "other.json"]);
    assert_eq!(code(&bin(d, &["ledger", "--dir", "led", "claim", "--key", "key.json", "--name", "zlib"])), 0);
    let out = bin(
        d,
        &["ledger", "--dir", "led", "register", "--key", "other.json", "--name", "zlib", "--version", "1.3", "--hash", &"ab".repeat(32)],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn demo_poco_text() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["demo", "poco"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("naive advisory hits = 0 after tamper"), "{text}");
    assert!(text.contains("secure verify = FAIL (1 hash mismatch)"), "{text}");
    assert!(text.contains("naive advisory hits = 1"), "{text}");
}

#[test]
fn demo_poco_json_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin(dir.path(), &["--json", "demo", "poco", "--workdir", "one"]);
    let b = bin(dir.path(), &["--json", "demo", "poco", "--workdir", "two"]);
    assert_eq!(stdout(&a), stdout(&b));
    let v = json(&a);
    assert_eq!(v["control"]["sbom_version"], "1.9");
    assert_eq!(v["control"]["advisory_hits"], 1);
    assert_eq!(v["attack"]["sbom_version"], "1.13");
    assert_eq!(v["attack"]["advisory_hits"], 0);
    assert_eq!(v["attack"]["secure_overall"], "fail");
    assert_eq!(v["attack"]["hash_mismatches"], 1);
    assert!(dir.path().join("one/attack/conanfile.txt").exists());
}

#[test]
fn estimate_defaults_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&bin(dir.path(), &["--json", "estimate"]));
    assert!((v["identity_gib"].as_f64().unwrap() - 27.57).abs() < 0.01);
    assert!((v["library_gib"].as_f64().unwrap() - 550.15).abs() < 0.01);
    assert_eq!(v["verification_seconds"], 2.0);
    assert_eq!(v["registration_latency"]["confirmation_delay_min"], 40);
    let v = json(&bin(dir.path(), &["--json", "estimate", "--deps", "500"]));
    assert_eq!(v["verification_seconds"], 1.0);
}

#[test]
fn advisories_against_naive_sbom() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    copy_dir(&fixtures().join("projects/c"), &d.join("proj"));
    bin(d, &["generate", "proj", "--mode", "naive", "--out", "n.sbom.json"]);
    let db = fixtures().join("advisories.json");
    let out = bin(d, &["--json", "advisories", "n.sbom.json", "--db", db.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["hits"].as_array().unwrap().len(), 1);
}
