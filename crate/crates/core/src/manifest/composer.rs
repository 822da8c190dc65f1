//! Composer: `composer.json`, `composer.lock` and
//! `vendor/composer/installed.json`.

use super::jsonspan::{self, Node};
use super::{syntax, Occurrence, ScanError, VersionForm};

const CONSTRAINT_OPERATORS: &[&str] = &["^", "~", "=", "v"];

/// Platform requirements (`php`, `ext-*`, `lib-*`) have no vendor prefix.
fn is_package(name: &str) -> bool {
    name.contains('/')
}

pub(crate) fn scan_manifest(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let mut out = Vec::new();
    for table in ["require", "require-dev"] {
        for (name, value) in root.get(table).map(Node::members).unwrap_or_default() {
            if !is_package(name) {
                continue;
            }
            let s = value.as_str().ok_or_else(|| ScanError {
                line: 0,
                message: format!("{table}.{name} must be a string"),
            })?;
            out.push(Occurrence::from_json(name, s, CONSTRAINT_OPERATORS)?);
        }
    }
    Ok(out)
}

fn package_list(list: &Node, out: &mut Vec<Occurrence>) -> Result<(), ScanError> {
    for entry in list.items() {
        let (Some(name), Some(version)) = (
            entry.get("name").and_then(Node::as_str),
            entry.get("version").and_then(Node::as_str),
        ) else {
            return Err(ScanError {
                line: 0,
                message: "package entry needs name and version".into(),
            });
        };
        out.push(Occurrence::from_json(&name.value, version, &["v"])?);
        if let Some(normalized) = entry.get("version_normalized").and_then(Node::as_str) {
            let mut occ = Occurrence::from_json_unchecked(&name.value, normalized)?;
            occ.form = VersionForm::ComposerNormalized;
            out.push(occ);
        }
    }
    Ok(())
}

pub(crate) fn scan_lock(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let mut out = Vec::new();
    for key in ["packages", "packages-dev"] {
        if let Some(list) = root.get(key) {
            package_list(list, &mut out)?;
        }
    }
    Ok(out)
}

pub(crate) fn scan_installed(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let mut out = Vec::new();
    // Composer 1 wrote a bare array; Composer 2 wraps it in {"packages": [...]}.
    match &root {
        Node::Array(_) => package_list(&root, &mut out)?,
        _ => {
            if let Some(list) = root.get("packages") {
                package_list(list, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Composer's four-part normalized spelling, e.g. `1.9` -> `1.9.0.0`.
pub(crate) fn normalize(version: &crate::version::Version) -> String {
    let mut parts: Vec<String> = version.numbers().iter().map(u64::to_string).collect();
    while parts.len() < 4 {
        parts.push("0".into());
    }
    let mut out = parts.join(".");
    if let Some(suffix) = version.suffix() {
        out.push('-');
        out.push_str(suffix);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::version::Version;

    #[test]
    fn manifest_skips_platform_packages() {
        let src = br#"{"require": {"php": ">=8.1", "ext-json": "*", "monolog/monolog": "^2.9.1"}}"#;
        let occ = scan_manifest(src).unwrap();
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0].version, "2.9.1");
    }

    #[test]
    fn installed_with_normalized() {
        let src = br#"{"packages": [{"name": "psr/log", "version": "v3.0.0", "version_normalized": "3.0.0.0"}]}"#;
        let occ = scan_installed(src).unwrap();
        assert_eq!(occ.len(), 2);
        assert_eq!(occ[0].version, "3.0.0");
        assert_eq!(occ[1].form, VersionForm::ComposerNormalized);
        assert_eq!(&src[occ[1].span.clone()], b"3.0.0.0");
    }

    #[test]
    fn normalized_spelling() {
        assert_eq!(normalize(&Version::parse("1.13").unwrap()), "1.13.0.0");
        assert_eq!(normalize(&Version::parse("2.0-beta").unwrap()), "2.0.0.0-beta");
    }
}
