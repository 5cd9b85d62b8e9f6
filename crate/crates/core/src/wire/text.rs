//! Shared pieces of the line-oriented file formats: tokenizing, `key=value`
//! attributes and line-numbered errors.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The text does not follow the grammar.
    Parse,
    /// Well-formed, but the described object is inconsistent.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub kind: ErrorKind,
    pub message: String,
}

impl FormatError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Self { line, kind: ErrorKind::Parse, message: message.into() }
    }

    pub fn validation(line: usize, message: impl Into<String>) -> Self {
        Self { line, kind: ErrorKind::Validation, message: message.into() }
    }
}

/// Every problem found in one file, in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatErrors(pub Vec<FormatError>);

impl FormatErrors {
    pub fn is_parse(&self) -> bool {
        self.0.iter().any(|e| e.kind == ErrorKind::Parse)
    }
}

impl fmt::Display for FormatErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for FormatErrors {}

impl From<FormatError> for FormatErrors {
    fn from(e: FormatError) -> Self {
        Self(vec![e])
    }
}

/// One non-blank, non-comment line split into words and attributes.
#[derive(Debug)]
pub(crate) struct Line<'a> {
    pub no: usize,
    pub words: Vec<&'a str>,
    attrs: BTreeMap<&'a str, &'a str>,
}

impl<'a> Line<'a> {
    pub fn err(&self, message: impl Into<String>) -> FormatError {
        FormatError::parse(self.no, message)
    }

    pub fn keyword(&self) -> &'a str {
        self.words[0]
    }

    /// Positional word `i` (after the keyword).
    pub fn word(&self, i: usize, what: &str) -> Result<&'a str, FormatError> {
        self.words
            .get(i + 1)
            .copied()
            .ok_or_else(|| self.err(format!("{}: missing {what}", self.keyword())))
    }

    pub fn expect_words(&self, n: usize) -> Result<(), FormatError> {
        if self.words.len() > n + 1 {
            return Err(self.err(format!("{}: unexpected '{}'", self.keyword(), self.words[n + 1])));
        }
        Ok(())
    }

    pub fn attr(&self, key: &str) -> Option<&'a str> {
        self.attrs.get(key).copied()
    }

    pub fn req(&self, key: &str) -> Result<&'a str, FormatError> {
        self.attr(key)
            .ok_or_else(|| self.err(format!("{}: missing attribute {key}", self.keyword())))
    }

    pub fn num<T: FromStr>(&self, key: &str) -> Result<T, FormatError> {
        parse_num(self, key, self.req(key)?)
    }

    pub fn opt_num<T: FromStr>(&self, key: &str) -> Result<Option<T>, FormatError> {
        self.attr(key).map(|v| parse_num(self, key, v)).transpose()
    }

    pub fn word_num<T: FromStr>(&self, i: usize, what: &str) -> Result<T, FormatError> {
        parse_num(self, what, self.word(i, what)?)
    }

    /// Rejects attributes outside `allowed`.
    pub fn only(&self, allowed: &[&str]) -> Result<(), FormatError> {
        match self.attrs.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(self.err(format!("{}: unknown attribute {k}", self.keyword()))),
            None => Ok(()),
        }
    }
}

fn parse_num<T: FromStr>(line: &Line<'_>, key: &str, v: &str) -> Result<T, FormatError> {
    v.parse()
        .map_err(|_| line.err(format!("{}: {key}={v} is not a valid number", line.keyword())))
}

/// Splits `text` into lines after checking the `<magic> <version>` header.
pub(crate) fn lines<'a>(text: &'a str, magic: &str, version: u32) -> Result<Vec<Line<'a>>, FormatError> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = Vec::new();
        let mut attrs = BTreeMap::new();
        for tok in content.split_whitespace() {
            match tok.split_once('=') {
                Some((k, v)) => {
                    if k.is_empty() || v.is_empty() {
                        return Err(FormatError::parse(no, format!("malformed attribute '{tok}'")));
                    }
                    if attrs.insert(k, v).is_some() {
                        return Err(FormatError::parse(no, format!("duplicate attribute {k}")));
                    }
                }
                None if attrs.is_empty() => words.push(tok),
                None => return Err(FormatError::parse(no, format!("word '{tok}' after attributes"))),
            }
        }
        if words.is_empty() {
            return Err(FormatError::parse(no, "line has attributes but no keyword"));
        }
        let line = Line { no, words, attrs };
        if !header {
            if line.words != [magic, &version.to_string()] || !line.attrs.is_empty() {
                return Err(FormatError::parse(no, format!("expected header '{magic} {version}'")));
            }
            header = true;
            continue;
        }
        out.push(line);
    }
    if !header {
        return Err(FormatError::parse(1, format!("expected header '{magic} {version}'")));
    }
    Ok(out)
}

/// Formats a float so that parsing it back yields the same bits.
pub(crate) fn exact_f64(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_comments() {
        let ls = lines("# lead\n\nfmt 1\nfoo a b k=v # tail\n", "fmt", 1).unwrap();
        assert_eq!(ls.len(), 1);
        assert_eq!(ls[0].no, 4);
        assert_eq!(ls[0].words, ["foo", "a", "b"]);
        assert_eq!(ls[0].attr("k"), Some("v"));
    }

    #[test]
    fn bad_header_and_attributes() {
        assert_eq!(lines("fmt 2\n", "fmt", 1).unwrap_err().line, 1);
        assert_eq!(lines("", "fmt", 1).unwrap_err().line, 1);
        assert_eq!(lines("fmt 1\nx k=1 k=2\n", "fmt", 1).unwrap_err().line, 2);
        assert_eq!(lines("fmt 1\nx k=1 y\n", "fmt", 1).unwrap_err().line, 2);
        assert_eq!(lines("fmt 1\nx =1\n", "fmt", 1).unwrap_err().line, 2);
    }

    #[test]
    fn float_text_is_exact() {
        for x in [0.0, 0.1, 1.0 / 3.0, 2.9802e-2, 1e-300] {
            assert_eq!(exact_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
