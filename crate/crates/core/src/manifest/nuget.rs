//! NuGet `packages.config`.

use std::sync::OnceLock;

use regex::Regex;

use super::{jsonspan::line_of, Occurrence, ScanError, VersionForm};

fn element_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<!--.*?-->|<package\b[^>]*>").expect("valid regex"))
}

fn attr_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"\b([A-Za-z_][\w.-]*)\s*=\s*(?:"([^"]*)"|'([^']*)')"#).expect("valid regex"))
}

pub(crate) fn scan(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let mut out = Vec::new();
    for element in element_re().find_iter(text) {
        if element.as_str().starts_with("<!--") {
            continue;
        }
        let line = line_of(text.as_bytes(), element.start());
        let mut id = None;
        let mut version = None;
        for caps in attr_re().captures_iter(element.as_str()) {
            let value = caps.get(2).or_else(|| caps.get(3)).unwrap();
            match &caps[1] {
                "id" => id = Some(value.as_str().to_string()),
                "version" => version = Some(value),
                _ => {}
            }
        }
        let (Some(id), Some(version)) = (id, version) else {
            return Err(ScanError {
                line,
                message: "package element needs id and version attributes".into(),
            });
        };
        let start = element.start() + version.start();
        out.push(Occurrence::new(
            &id,
            version.as_str(),
            start..start + version.len(),
            VersionForm::Declared,
            line,
        )?);
    }
    Ok(out)
}
