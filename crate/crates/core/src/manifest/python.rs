//! `requirements.txt`: one pinned `name==version` per line.

use std::sync::OnceLock;

use regex::Regex;

use super::{Occurrence, ScanError, VersionForm};

fn requirement_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z0-9][A-Za-z0-9._-]*)\s*(?:\[[^\]]*\])?\s*(===|==|~=|!=|<=|>=|<|>)\s*([^\s;]+)")
            .expect("valid regex")
    })
}

pub(crate) fn scan(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (idx, raw_line) in text.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let line_start = offset;
        offset += raw_line.len();
        let line = raw_line.trim_end_matches(['\n', '\r']);
        // pip treats '#' as a comment at line start or after whitespace.
        let content_end = line
            .char_indices()
            .find(|&(i, c)| c == '#' && (i == 0 || line[..i].ends_with(char::is_whitespace)))
            .map_or(line.len(), |(i, _)| i);
        let content = &line[..content_end];
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() || trimmed.starts_with('-') {
            continue;
        }
        let lead = content.len() - trimmed.len();
        let caps = requirement_re().captures(trimmed).ok_or_else(|| ScanError {
            line: line_no,
            message: format!("unrecognised requirement {:?}", trimmed.trim()),
        })?;
        let op = &caps[2];
        if op != "==" && op != "===" {
            return Err(ScanError {
                line: line_no,
                message: format!("requirement {:?} is not pinned with ==", trimmed.trim()),
            });
        }
        let version = caps.get(3).unwrap();
        let rest = trimmed[version.end()..].trim_start();
        if !(rest.is_empty() || rest.starts_with(';') || rest.starts_with("--")) {
            return Err(ScanError {
                line: line_no,
                message: format!("unexpected text after version: {rest:?}"),
            });
        }
        let start = line_start + lead + version.start();
        out.push(Occurrence::new(
            &caps[1],
            version.as_str(),
            start..start + version.len(),
            VersionForm::Declared,
            line_no,
        )?);
    }
    Ok(out)
}
