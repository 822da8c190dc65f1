//! Cargo `Cargo.toml` (read-only).

use super::{Occurrence, ScanError, VersionForm};

const TABLES: &[&str] = &["dependencies", "dev-dependencies", "build-dependencies"];

pub(crate) fn scan(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ScanError {
        line: e
            .span()
            .map_or(1, |s| super::jsonspan::line_of(text.as_bytes(), s.start)),
        message: e.message().to_string(),
    })?;
    let mut out = Vec::new();
    for table in TABLES {
        let Some(deps) = doc.get(*table).and_then(toml::Value::as_table) else {
            continue;
        };
        for (name, spec) in deps {
            let requirement = match spec {
                toml::Value::String(s) => Some(s.as_str()),
                toml::Value::Table(t) => t.get("version").and_then(toml::Value::as_str),
                _ => None,
            };
            // Path, git and workspace-inherited dependencies carry no version here.
            let Some(requirement) = requirement else {
                continue;
            };
            let bare = requirement
                .strip_prefix(['^', '=', '~'])
                .unwrap_or(requirement)
                .trim();
            out.push(Occurrence::new(name, bare, 0..0, VersionForm::Declared, 0)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_and_table_forms() {
        let src = "[dependencies]\nserde = { version = \"1.0.190\", features = [\"derive\"] }\nregex = \"1.10.2\"\nlocal = { path = \"../local\" }\n";
        let occ = scan(src).unwrap();
        let mut got: Vec<_> = occ.iter().map(|o| (o.name.as_str(), o.version.as_str())).collect();
        got.sort();
        assert_eq!(got, [("regex", "1.10.2"), ("serde", "1.0.190")]);
    }

    #[test]
    fn syntax_error_line() {
        let err = scan("[dependencies]\nserde = \n").unwrap_err();
        assert_eq!(err.line, 2);
    }
}
