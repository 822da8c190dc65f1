//! Minimal JSON reader that remembers where each string value sits in the
//! source, so version strings can be rewritten without reformatting a file.

use std::ops::Range;

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct SyntaxError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub(crate) struct StrNode {
    pub value: String,
    /// Byte range of the literal's contents, quotes excluded.
    pub span: Range<usize>,
    /// True when the contents contain no escapes, i.e. source == value.
    pub verbatim: bool,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Object(Vec<(String, Node)>),
    Array(Vec<Node>),
    Str(StrNode),
    Other,
}

impl Node {
    pub fn get(&self, key: &str) -> Option<&Node> {
        match self {
            Node::Object(members) => members.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&StrNode> {
        match self {
            Node::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn members(&self) -> &[(String, Node)] {
        match self {
            Node::Object(members) => members,
            _ => &[],
        }
    }

    pub fn items(&self) -> &[Node] {
        match self {
            Node::Array(items) => items,
            _ => &[],
        }
    }
}

pub(crate) fn parse(bytes: &[u8]) -> Result<Node, SyntaxError> {
    if std::str::from_utf8(bytes).is_err() {
        return Err(SyntaxError {
            line: 1,
            message: "file is not valid UTF-8".into(),
        });
    }
    let mut p = Parser { src: bytes, pos: 0 };
    // Tolerate a UTF-8 byte order mark.
    if bytes.starts_with(&[0xef, 0xbb, 0xbf]) {
        p.pos = 3;
    }
    p.skip_ws();
    let node = p.value(0)?;
    p.skip_ws();
    if p.pos != bytes.len() {
        return Err(p.error("trailing characters after document"));
    }
    Ok(node)
}

/// 1-based line of byte offset `pos`.
pub(crate) fn line_of(src: &[u8], pos: usize) -> usize {
    1 + src[..pos.min(src.len())].iter().filter(|&&b| b == b'\n').count()
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError {
            line: line_of(self.src, self.pos),
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\n' | b'\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), SyntaxError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", b as char)))
        }
    }

    fn value(&mut self, depth: usize) -> Result<Node, SyntaxError> {
        if depth > MAX_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        match self.peek() {
            Some(b'{') => self.object(depth),
            Some(b'[') => self.array(depth),
            Some(b'"') => self.string().map(Node::Str),
            Some(b't') => self.literal(b"true"),
            Some(b'f') => self.literal(b"false"),
            Some(b'n') => self.literal(b"null"),
            Some(b'-' | b'0'..=b'9') => self.number(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn object(&mut self, depth: usize) -> Result<Node, SyntaxError> {
        self.expect(b'{')?;
        let mut members = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(Node::Object(members));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'"') {
                return Err(self.error("expected object key"));
            }
            let key = self.string()?.value;
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let value = self.value(depth + 1)?;
            members.push((key, value));
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(Node::Object(members));
                }
                _ => return Err(self.error("expected ',' or '}'")),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<Node, SyntaxError> {
        self.expect(b'[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            return Ok(Node::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    return Ok(Node::Array(items));
                }
                _ => return Err(self.error("expected ',' or ']'")),
            }
        }
    }

    fn literal(&mut self, word: &[u8]) -> Result<Node, SyntaxError> {
        if self.src[self.pos..].starts_with(word) {
            self.pos += word.len();
            Ok(Node::Other)
        } else {
            Err(self.error("invalid literal"))
        }
    }

    fn number(&mut self) -> Result<Node, SyntaxError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(b'0'..=b'9')) {
                p.pos += 1;
            }
            p.pos > s
        };
        if !digits(self) {
            return Err(self.error("invalid number"));
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            if !digits(self) {
                return Err(self.error("invalid number"));
            }
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                return Err(self.error("invalid number"));
            }
        }
        debug_assert!(self.pos > start);
        Ok(Node::Other)
    }

    fn hex4(&mut self) -> Result<u32, SyntaxError> {
        let chunk = self
            .src
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.error("truncated \\u escape"))?;
        let text = std::str::from_utf8(chunk).map_err(|_| self.error("bad \\u escape"))?;
        let v = u32::from_str_radix(text, 16).map_err(|_| self.error("bad \\u escape"))?;
        self.pos += 4;
        Ok(v)
    }

    fn string(&mut self) -> Result<StrNode, SyntaxError> {
        let line = line_of(self.src, self.pos);
        self.expect(b'"')?;
        let start = self.pos;
        let mut value = String::new();
        let mut verbatim = true;
        let mut run_start = self.pos;
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated string")),
                Some(b'"') => {
                    value.push_str(std::str::from_utf8(&self.src[run_start..self.pos]).unwrap());
                    let span = start..self.pos;
                    self.pos += 1;
                    return Ok(StrNode {
                        value,
                        span,
                        verbatim,
                        line,
                    });
                }
                Some(b'\\') => {
                    verbatim = false;
                    value.push_str(std::str::from_utf8(&self.src[run_start..self.pos]).unwrap());
                    self.pos += 1;
                    let esc = self.peek().ok_or_else(|| self.error("unterminated escape"))?;
                    self.pos += 1;
                    match esc {
                        b'"' => value.push('"'),
                        b'\\' => value.push('\\'),
                        b'/' => value.push('/'),
                        b'b' => value.push('\u{8}'),
                        b'f' => value.push('\u{c}'),
                        b'n' => value.push('\n'),
                        b'r' => value.push('\r'),
                        b't' => value.push('\t'),
                        b'u' => {
                            let hi = self.hex4()?;
                            let code = if (0xd800..0xdc00).contains(&hi) {
                                if !self.src[self.pos..].starts_with(b"\\u") {
                                    return Err(self.error("unpaired surrogate"));
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xdc00..0xe000).contains(&lo) {
                                    return Err(self.error("unpaired surrogate"));
                                }
                                0x10000 + ((hi - 0xd800) << 10) + (lo - 0xdc00)
                            } else {
                                hi
                            };
                            value.push(
                                char::from_u32(code).ok_or_else(|| self.error("bad code point"))?,
                            );
                        }
                        _ => return Err(self.error("invalid escape")),
                    }
                    run_start = self.pos;
                }
                Some(b) if b < 0x20 => return Err(self.error("control character in string")),
                Some(_) => self.pos += 1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_point_at_contents() {
        let src = br#"{"a": {"version": "1.9"}, "b": ["x", "y\"z"]}"#;
        let node = parse(src).unwrap();
        let v = node.get("a").unwrap().get("version").unwrap().as_str().unwrap();
        assert_eq!(&src[v.span.clone()], b"1.9");
        assert!(v.verbatim);
        let items = node.get("b").unwrap().items();
        let esc = items[1].as_str().unwrap();
        assert_eq!(esc.value, "y\"z");
        assert!(!esc.verbatim);
    }

    #[test]
    fn agrees_with_serde_on_values() {
        let src = r#"{"k":"café 😀","n":[1,-2.5e3,true,null]}"#;
        let node = parse(src.as_bytes()).unwrap();
        let ours = &node.get("k").unwrap().as_str().unwrap().value;
        let theirs: serde_json::Value = serde_json::from_str(src).unwrap();
        assert_eq!(ours, theirs["k"].as_str().unwrap());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse(b"{\n  \"a\": 1,\n  \"b\": }\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn rejects_trailing_garbage() {
        assert!(parse(b"{} x").is_err());
        assert!(parse(b"[1,]").is_err());
    }
}
