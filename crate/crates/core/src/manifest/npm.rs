//! npm: `package.json`, `package-lock.json` (v1-v3) and installed
//! `node_modules/<name>/package.json` files.

use super::jsonspan::{self, Node};
use super::{syntax, Occurrence, ScanError};

const RANGE_OPERATORS: &[&str] = &["^", "~", "=", "v"];
const DEPENDENCY_TABLES: &[&str] = &["dependencies", "devDependencies", "optionalDependencies"];

fn dependency_table(node: &Node, strict: bool, out: &mut Vec<Occurrence>) -> Result<(), ScanError> {
    for table in DEPENDENCY_TABLES {
        if let Some(deps) = node.get(table) {
            for (name, value) in deps.members() {
                let Some(s) = value.as_str() else {
                    return Err(ScanError {
                        line: 0,
                        message: format!("{table}.{name} must be a string"),
                    });
                };
                match Occurrence::from_json(name, s, RANGE_OPERATORS) {
                    Ok(occ) => out.push(occ),
                    Err(e) if strict => return Err(e),
                    // Transitive requirement ranges inside a lock are not pins.
                    Err(_) => {}
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn scan_package_json(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let mut out = Vec::new();
    dependency_table(&root, true, &mut out)?;
    Ok(out)
}

pub(crate) fn scan_lock(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let mut out = Vec::new();
    if let Some(packages) = root.get("packages") {
        for (key, entry) in packages.members() {
            if key.is_empty() {
                dependency_table(entry, true, &mut out)?;
                continue;
            }
            let Some(idx) = key.rfind("node_modules/") else {
                continue;
            };
            let name = &key[idx + "node_modules/".len()..];
            // Symlinked workspace entries carry no version.
            if let Some(version) = entry.get("version").and_then(Node::as_str) {
                out.push(Occurrence::from_json(name, version, &[])?);
            }
            dependency_table(entry, false, &mut out)?;
        }
    }
    if let Some(deps) = root.get("dependencies") {
        legacy_tree(deps, &mut out)?;
    }
    Ok(out)
}

fn legacy_tree(deps: &Node, out: &mut Vec<Occurrence>) -> Result<(), ScanError> {
    for (name, entry) in deps.members() {
        if let Some(version) = entry.get("version").and_then(Node::as_str) {
            out.push(Occurrence::from_json(name, version, &[])?);
        }
        if let Some(nested) = entry.get("dependencies") {
            legacy_tree(nested, out)?;
        }
    }
    Ok(())
}

pub(crate) fn scan_installed(bytes: &[u8]) -> Result<Vec<Occurrence>, ScanError> {
    let root = jsonspan::parse(bytes).map_err(syntax)?;
    let name = root.get("name").and_then(Node::as_str);
    let version = root.get("version").and_then(Node::as_str);
    match (name, version) {
        (Some(name), Some(version)) => Ok(vec![Occurrence::from_json(&name.value, version, &[])?]),
        _ => Err(ScanError {
            line: 1,
            message: "installed package.json needs name and version".into(),
        }),
    }
}
