use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use sbomguard::ledger::{
    audit_dir, ChainKind, DualLedger, IdentityTransaction, LedgerConfig, LedgerError, LedgerTx, LibraryName,
    LibraryTransaction, PackedVersion, IDENTITY_CHAIN_FILE, IDENTITY_TX_LEN, LIBRARY_CHAIN_FILE, LIBRARY_TX_LEN,
};
use sbomguard::{Hash256, Keypair, PublicKey};

const NAMES: &[&str] = &["poco", "zlib", "openssl"];
const KEYS: u8 = 3;

fn key(i: u8) -> Keypair {
    Keypair::from_seed([i + 1; 32])
}

fn name() -> impl Strategy<Value = LibraryName> {
    "[a-zA-Z0-9_.@/+-]{1,32}".prop_map(|s| LibraryName::new(&s).unwrap())
}

fn packed() -> impl Strategy<Value = PackedVersion> {
    (any::<u16>(), any::<u16>(), any::<u16>()).prop_map(|(a, b, c)| PackedVersion::new(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn identity_transactions_are_296_bytes(seed in any::<[u8; 32]>(), to in any::<[u8; 32]>(), ts in any::<u64>(),
                                            n in name(), prev in any::<[u8; 32]>(), claim in any::<bool>()) {
        let k = Keypair::from_seed(seed);
        let tx = if claim {
            IdentityTransaction::claim(&k, ts, n)
        } else {
            IdentityTransaction::transfer(&k, ts, Keypair::from_seed(to).public_key(), n, Hash256::from_bytes(prev))
        };
        let bytes = tx.encode();
        prop_assert_eq!(bytes.len(), IDENTITY_TX_LEN);
        prop_assert_eq!(IDENTITY_TX_LEN, 296);
        let back = IdentityTransaction::decode(&bytes).unwrap();
        prop_assert!(back.check_integrity().is_ok());
        prop_assert_eq!(back, tx);
    }

    #[test]
    fn library_transactions_are_208_bytes(seed in any::<[u8; 32]>(), ts in any::<u64>(), n in name(),
                                          v in packed(), h in any::<[u8; 32]>()) {
        let tx = LibraryTransaction::signed(&Keypair::from_seed(seed), ts, n, v, Hash256::from_bytes(h));
        let bytes = tx.encode();
        prop_assert_eq!(bytes.len(), LIBRARY_TX_LEN);
        prop_assert_eq!(LIBRARY_TX_LEN, 208);
        let back = LibraryTransaction::decode(&bytes).unwrap();
        prop_assert!(back.check_integrity().is_ok());
        prop_assert_eq!(back, tx);
    }
}

#[derive(Debug, Clone)]
enum Op {
    Claim { by: u8, name: usize },
    Transfer { by: u8, to: u8, name: usize },
    Register { by: u8, name: usize, minor: u16 },
    Seal,
}

fn op() -> impl Strategy<Value = Op> {
    let n = 0..NAMES.len();
    prop_oneof![
        3 => (0..KEYS, n.clone()).prop_map(|(by, name)| Op::Claim { by, name }),
        2 => (0..KEYS, 0..KEYS, n.clone()).prop_map(|(by, to, name)| Op::Transfer { by, to, name }),
        4 => (0..KEYS, n, 0u16..4).prop_map(|(by, name, minor)| Op::Register { by, name, minor }),
        1 => Just(Op::Seal),
    ]
}

/// The obvious model: current owner per name, set of registered versions,
/// and the accepted identity events for brute-force replay.
#[derive(Default)]
struct Model {
    owner: HashMap<usize, u8>,
    versions: HashSet<(usize, u16)>,
    events: Vec<(u64, usize, u8)>,
    records: Vec<(usize, u16, u64, u8)>,
}

impl Model {
    fn owner_at(&self, name: usize, t: u64) -> Option<u8> {
        let mut owner = None;
        for &(ts, n, who) in &self.events {
            if n == name && ts <= t {
                owner = Some(who);
            }
        }
        owner
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Every rule violation a client can attempt is refused, every valid
    /// transaction is accepted, and ownership queries agree with replay.
    #[test]
    fn ledger_matches_replay_oracle(ops in prop::collection::vec(op(), 1..60), gaps in prop::collection::vec(1u64..4, 60)) {
        let mut ledger = DualLedger::new(LedgerConfig::instant());
        let mut model = Model::default();
        let mut ts = 100;
        for (op, gap) in ops.iter().zip(&gaps) {
            ts += gap;
            match *op {
                Op::Claim { by, name } => {
                    let ok = !model.owner.contains_key(&name);
                    let got = ledger.claim_ownership_at(&key(by), NAMES[name], ts);
                    prop_assert_eq!(got.is_ok(), ok, "claim {:?}", got);
                    if !ok {
                        let is_already_owned = matches!(got, Err(LedgerError::AlreadyOwned { .. }));
                        prop_assert!(is_already_owned);
                    } else {
                        model.owner.insert(name, by);
                        model.events.push((ts, name, by));
                    }
                }
                Op::Transfer { by, to, name } => {
                    let ok = model.owner.get(&name) == Some(&by);
                    let got = ledger.transfer_ownership_at(&key(by), key(to).public_key(), NAMES[name], ts);
                    prop_assert_eq!(got.is_ok(), ok, "transfer {:?}", got);
                    if ok {
                        model.owner.insert(name, to);
                        model.events.push((ts, name, to));
                    }
                }
                Op::Register { by, name, minor } => {
                    let ok = model.owner.get(&name) == Some(&by) && !model.versions.contains(&(name, minor));
                    let v = format!("1.{minor}.0");
                    let got = ledger.register_library_at(&key(by), NAMES[name], &v, Hash256::digest(v.as_bytes()), ts);
                    prop_assert_eq!(got.is_ok(), ok, "register {:?}", got);
                    if ok {
                        model.versions.insert((name, minor));
                        model.records.push((name, minor, ts, by));
                    }
                }
                Op::Seal => {
                    if let Ok(out) = ledger.seal_all() {
                        prop_assert!(out.rejected.is_empty());
                    }
                }
            }
        }
        if let Ok(out) = ledger.seal_all() {
            prop_assert!(out.rejected.is_empty());
        }
        for (n, name) in NAMES.iter().enumerate() {
            for t in 95..=ts + 2 {
                let want = model.owner_at(n, t).map(|i| key(i).public_key());
                prop_assert_eq!(ledger.owner_at(name, t), want, "{} at {}", name, t);
            }
        }
        for &(name, minor, at, by) in &model.records {
            let entry = ledger.query_and_verify(NAMES[name], &format!("1.{minor}.0")).unwrap();
            prop_assert_eq!(entry.transaction.timestamp, at);
            prop_assert_eq!(entry.proof.owner, key(by).public_key());
        }
        prop_assert_eq!(ledger.library_record_count(), model.records.len());
        prop_assert!(ledger.audit().ok());
    }
}

/// A small ledger with several blocks on both chains.
fn populated() -> DualLedger {
    let mut l = DualLedger::new(LedgerConfig::instant());
    let (a, b) = (key(0), key(1));
    let mut ts = 1_000;
    for (i, name) in NAMES.iter().enumerate() {
        ts += 1;
        l.claim_ownership_at(&a, name, ts).unwrap();
        for minor in 0..3 {
            ts += 1;
            l.register_library_at(&a, name, &format!("{i}.{minor}.0"), Hash256::digest(name.as_bytes()), ts).unwrap();
        }
        l.seal_all().unwrap();
    }
    ts += 1;
    l.transfer_ownership_at(&a, b.public_key(), "zlib", ts).unwrap();
    ts += 1;
    l.register_library_at(&b, "zlib", "9.0.0", Hash256::digest(b"z"), ts).unwrap();
    l.seal_all().unwrap();
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn any_single_bit_flip_is_caught(library in any::<bool>(), pick in any::<prop::sample::Index>()) {
        let dir = tempfile::tempdir().unwrap();
        populated().save(dir.path()).unwrap();
        prop_assert!(audit_dir(dir.path()).unwrap().ok());
        let file = dir.path().join(if library { LIBRARY_CHAIN_FILE } else { IDENTITY_CHAIN_FILE });
        let mut bytes = std::fs::read(&file).unwrap();
        let bit = pick.index(bytes.len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        std::fs::write(&file, &bytes).unwrap();
        let report = audit_dir(dir.path()).unwrap();
        prop_assert!(!report.ok(), "flip of bit {} went unnoticed", bit);
        let is_corrupt = matches!(DualLedger::open(dir.path(), LedgerConfig::instant()), Err(LedgerError::Corrupt(_)));
        prop_assert!(is_corrupt);
    }

    /// Records signed by anyone but the owner never reach the library chain,
    /// whether they are honestly signed by the attacker or claim the owner's key.
    #[test]
    fn forged_registrations_never_land(attacker_seed in any::<[u8; 32]>(), minor in 0u16..100, impersonate in any::<bool>()) {
        let owner = key(0);
        let attacker = Keypair::from_seed(attacker_seed);
        prop_assume!(attacker.public_key() != owner.public_key());
        let mut l = DualLedger::new(LedgerConfig::instant());
        l.claim_ownership_at(&owner, "poco", 10).unwrap();
        l.seal_all().unwrap();
        let version = PackedVersion::new(1, minor, 0);
        let mut tx = LibraryTransaction::signed(&attacker, 20, LibraryName::new("poco").unwrap(), version, Hash256::digest(b"evil"));
        if impersonate {
            tx.owner_pubkey = owner.public_key();
            tx.id = tx.compute_id();
        }
        l.submit_library(tx);
        let out = l.form_block(ChainKind::Library).unwrap();
        prop_assert_eq!(out.accepted, 0);
        prop_assert_eq!(out.rejected.len(), 1);
        let missing = matches!(l.query_and_verify("poco", &version.to_string()), Err(LedgerError::NotFound { .. }));
        prop_assert!(missing);
        // The checked submission path refuses the same attacker up front.
        let refused = matches!(
            l.register_library_at(&attacker, "poco", &version.to_string(), Hash256::digest(b"evil"), 30),
            Err(LedgerError::NotOwner(_))
        );
        prop_assert!(refused);
    }
}

#[test]
fn spliced_foreign_block_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let honest = populated();
    honest.save(dir.path()).unwrap();
    // An attacker with write access appends a block of their own making.
    let attacker = Keypair::from_seed([66; 32]);
    let forged = LibraryTransaction::signed(&attacker, 99_999, LibraryName::new("poco").unwrap(), PackedVersion::new(7, 7, 7), Hash256::digest(b"x"));
    let block = sbomguard::ledger::Block::seal(honest.library_blocks().last().map(|b| &b.header), vec![forged]);
    let mut bytes = std::fs::read(dir.path().join(LIBRARY_CHAIN_FILE)).unwrap();
    bytes.extend_from_slice(&sbomguard::ledger::encode_chain(&[block]));
    std::fs::write(dir.path().join(LIBRARY_CHAIN_FILE), bytes).unwrap();
    let report = audit_dir(dir.path()).unwrap();
    assert!(report.findings.iter().any(|f| f.kind == sbomguard::ledger::FindingKind::RuleViolation));
}

#[test]
fn owner_keys_are_distinct() {
    let keys: HashSet<PublicKey> = (0..KEYS).map(|i| key(i).public_key()).collect();
    assert_eq!(keys.len(), KEYS as usize);
}
