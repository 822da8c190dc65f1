//! Maven `pom.xml` (read-only).

use std::sync::OnceLock;

use regex::Regex;

use super::{jsonspan::line_of, Occurrence, ScanError, VersionForm};

fn dependency_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<!--.*?-->|<dependency>(.*?)</dependency>").expect("valid regex"))
}

fn tag(body: &str, name: &str) -> Option<(usize, String)> {
    let open = format!("<{name}>");
    let close = format!("</{name}>");
    let start = body.find(&open)? + open.len();
    let len = body[start..].find(&close)?;
    let raw = &body[start..start + len];
    let lead = raw.len() - raw.trim_start().len();
    Some((start + lead, raw.trim().to_string()))
}

pub(crate) fn scan(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let mut out = Vec::new();
    for caps in dependency_re().captures_iter(text) {
        let Some(body) = caps.get(1) else {
            continue;
        };
        let line = line_of(text.as_bytes(), body.start());
        let group = tag(body.as_str(), "groupId");
        let artifact = tag(body.as_str(), "artifactId");
        let version = tag(body.as_str(), "version");
        let (Some((_, group)), Some((_, artifact))) = (group, artifact) else {
            return Err(ScanError {
                line,
                message: "dependency needs groupId and artifactId".into(),
            });
        };
        let Some((at, version)) = version else {
            return Err(ScanError {
                line,
                message: format!("{group}:{artifact} has no explicit <version>"),
            });
        };
        let start = body.start() + at;
        out.push(Occurrence::new(
            &format!("{group}:{artifact}"),
            &version,
            start..start + version.len(),
            VersionForm::Declared,
            line,
        )?);
    }
    Ok(out)
}
