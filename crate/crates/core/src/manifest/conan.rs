//! Conan recipes: `conanfile.txt` `[requires]` sections and `requires`
//! string literals in `conanfile.py`. Python recipes are pattern-matched,
//! never executed.

use std::sync::OnceLock;

use regex::Regex;

use super::{Occurrence, ScanError, VersionForm};

fn reference_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z0-9_][A-Za-z0-9_.+-]*)/([^@#/\s]+)(@[^#\s]*)?(#\S*)?$").expect("valid regex")
    })
}

fn literal_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#""([^"\\\n]*)"|'([^'\\\n]*)'"#).expect("valid regex"))
}

fn requires_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\brequires\b").expect("valid regex"))
}

fn reference(text: &str, base: usize, line: usize) -> Result<Option<Occurrence>, ScanError> {
    let Some(caps) = reference_re().captures(text) else {
        return Ok(None);
    };
    let version = caps.get(2).unwrap();
    Occurrence::new(
        &caps[1],
        version.as_str(),
        base + version.start()..base + version.end(),
        VersionForm::Declared,
        line,
    )
    .map(Some)
}

pub(crate) fn scan_txt(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let mut out = Vec::new();
    let mut offset = 0;
    let mut in_requires = false;
    for (idx, raw_line) in text.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let line_start = offset;
        offset += raw_line.len();
        let line = raw_line.trim_end_matches(['\n', '\r']);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') && trimmed.ends_with(']') {
            in_requires = trimmed == "[requires]";
            continue;
        }
        if !in_requires {
            continue;
        }
        let lead = line.len() - line.trim_start().len();
        match reference(trimmed, line_start + lead, line_no)? {
            Some(occ) => out.push(occ),
            None => {
                return Err(ScanError {
                    line: line_no,
                    message: format!("unrecognised requirement {trimmed:?}"),
                })
            }
        }
    }
    Ok(out)
}

pub(crate) fn scan_py(text: &str) -> Result<Vec<Occurrence>, ScanError> {
    let mut out = Vec::new();
    let mut offset = 0;
    // Open bracket depth of a `requires = (...)` statement spanning lines.
    let mut depth: i32 = 0;
    for (idx, raw_line) in text.split_inclusive('\n').enumerate() {
        let line_no = idx + 1;
        let line_start = offset;
        offset += raw_line.len();
        let code = match raw_line.find('#') {
            Some(i) if !raw_line[..i].contains(['"', '\'']) => &raw_line[..i],
            _ => raw_line,
        };
        let active = depth > 0 || requires_re().is_match(code);
        if !active {
            continue;
        }
        for caps in literal_re().captures_iter(code) {
            let m = caps.get(1).or_else(|| caps.get(2)).unwrap();
            if let Some(occ) = reference(m.as_str(), line_start + m.start(), line_no)? {
                out.push(occ);
            }
        }
        let opens = code.matches(['(', '[']).count() as i32;
        let closes = code.matches([')', ']']).count() as i32;
        depth = (depth + opens - closes).max(0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn txt_requires_only() {
        let src = "[requires]\npoco-demo/1.9\nzlib/1.2.13@user/stable#rev1\n\n[generators]\nCMakeDeps\n";
        let occ = scan_txt(src).unwrap();
        assert_eq!(occ.len(), 2);
        assert_eq!((occ[0].name.as_str(), occ[0].version.as_str()), ("poco-demo", "1.9"));
        assert_eq!(&src[occ[1].span.clone()], "1.2.13");
    }

    #[test]
    fn txt_version_range_rejected() {
        assert!(scan_txt("[requires]\nzlib/[>1.2]\n").is_err());
    }

    #[test]
    fn py_literals() {
        let src = "class R(ConanFile):\n    name = \"app/0.1\"\n    requires = \"poco-demo/1.9\"\n    def requirements(self):\n        self.requires('fmt/10.1.1')\n        self.tool_requires(\"cmake/3.27.7\")\n";
        let occ = scan_py(src).unwrap();
        let names: Vec<_> = occ.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["poco-demo", "fmt"]);
        assert_eq!(&src[occ[0].span.clone()], "1.9");
    }

    #[test]
    fn py_multiline_tuple() {
        let src = "    requires = (\n        \"a/1.0\",\n        \"b/2.0\",\n    )\n    other = \"c/3.0\"\n";
        let occ = scan_py(src).unwrap();
        let names: Vec<_> = occ.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
    }
}
