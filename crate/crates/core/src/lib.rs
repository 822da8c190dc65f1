//! SBOM tampering toolkit.
//!
//! Generates SBOMs from package manifests, either trusting the declared
//! versions ([`generator::generate_naive`]) or hashing artifacts pinned ahead
//! of time ([`generator::generate_secure`]). Signed SBOMs are checked against
//! a reference provider: a local registry, a package index over HTTP, or the
//! dual ledger in [`ledger`].

pub mod crypto;
pub mod demo;
pub mod ecosystem;
pub mod feasibility;
pub mod generator;
pub mod hash;
pub mod ledger;
pub mod manifest;
pub mod model;
pub mod registry;
pub mod verifier;
pub mod version;

pub use crypto::{Keypair, PublicKey, Signature};
pub use ecosystem::{Ecosystem, PackageCoords};
pub use hash::Hash256;
pub use model::{Component, SbomDocument, SignatureEnvelope, SignatureStatus, ToolMode};
