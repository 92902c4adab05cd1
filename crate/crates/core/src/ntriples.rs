//! N-Triples reader.
//!
//! One triple per line, terminated by `.`; blank lines and `#` comments are
//! skipped. Escapes in IRIs (`\uXXXX`) and literals (`\n`, `\"`, ...) are
//! decoded. Blank-node labels are scoped to a single document.

use crate::store::Dataset;
use crate::term::{Term, Triple};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

pub fn parse_ntriples(text: &str) -> Result<Dataset, SyntaxError> {
    let mut dataset = Dataset::new();
    for (idx, raw) in text.lines().enumerate() {
        if let Some(triple) = parse_line(raw, idx + 1)? {
            dataset.insert(triple);
        }
    }
    Ok(dataset)
}

/// Parses one line; `Ok(None)` for blank and comment lines.
pub fn parse_line(raw: &str, line: usize) -> Result<Option<Triple>, SyntaxError> {
    let mut cur = Cursor::new(raw, line);
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let subject = cur.term()?;
    if subject.is_literal() {
        return Err(cur.error_at(0, "subject must be an IRI or blank node"));
    }
    cur.skip_ws();
    let pcol = cur.pos;
    let predicate = cur.term()?;
    if !predicate.is_iri() {
        return Err(cur.error_at(pcol, "predicate must be an IRI"));
    }
    cur.skip_ws();
    let object = cur.term()?;
    cur.skip_ws();
    if !cur.eat('.') {
        return Err(cur.error("expected '.' after object"));
    }
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some('#') {
        return Err(cur.error("unexpected content after '.'"));
    }
    Ok(Some(Triple::new(subject, predicate, object)))
}

/// Parses a single term in N-Triples syntax. `_:o` is accepted as a blank
/// node like any other label.
pub fn parse_term(text: &str) -> Result<Term, SyntaxError> {
    let mut cur = Cursor::new(text.trim(), 1);
    let term = cur.term()?;
    cur.skip_ws();
    if !cur.at_end() {
        return Err(cur.error("trailing characters after term"));
    }
    Ok(term)
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn error(&self, message: &str) -> SyntaxError {
        self.error_at(self.pos, message)
    }

    fn error_at(&self, pos: usize, message: &str) -> SyntaxError {
        SyntaxError {
            line: self.line,
            column: pos + 1,
            message: message.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ') | Some('\t') | Some('\r')) {
            self.pos += 1;
        }
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        match self.peek() {
            Some('<') => self.iri().map(Term::Iri),
            Some('_') => self.blank(),
            Some('"') => self.literal(),
            Some(_) => Err(self.error("expected '<', '_:' or '\"'")),
            None => Err(self.error("unexpected end of line")),
        }
    }

    fn iri(&mut self) -> Result<std::sync::Arc<str>, SyntaxError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated IRI")),
                Some('>') => break,
                Some('\\') => out.push(self.unicode_escape()?),
                Some(c) if c.is_whitespace() || c == '<' || c == '"' => {
                    return Err(self.error_at(self.pos - 1, "invalid character in IRI"))
                }
                Some(c) => out.push(c),
            }
        }
        if out.is_empty() {
            return Err(self.error_at(start, "empty IRI"));
        }
        Ok(out.into())
    }

    fn blank(&mut self) -> Result<Term, SyntaxError> {
        let start = self.pos;
        self.bump();
        if !self.eat(':') {
            return Err(self.error_at(start, "expected '_:'"));
        }
        let mut id = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || matches!(c, '_' | '-' | '.') {
                id.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        // A trailing '.' belongs to the statement, not the label.
        while id.ends_with('.') {
            id.pop();
            self.pos -= 1;
        }
        if id.is_empty() {
            return Err(self.error_at(start, "empty blank node label"));
        }
        Ok(Term::blank(id))
    }

    fn literal(&mut self) -> Result<Term, SyntaxError> {
        let start = self.pos;
        self.bump();
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, "unterminated literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') | Some('U') => {
                            lexical.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.error("invalid escape in literal")),
                    };
                    self.pos += 1;
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        let annotation = match self.peek() {
            Some('@') => {
                let mut tag = String::from("@");
                self.pos += 1;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        tag.push(c);
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                if tag.len() == 1 {
                    return Err(self.error("empty language tag"));
                }
                Some(tag)
            }
            Some('^') => {
                self.pos += 1;
                if !self.eat('^') || self.peek() != Some('<') {
                    return Err(self.error("expected '^^<datatype>'"));
                }
                let dt = self.iri()?;
                Some(format!("^^<{dt}>"))
            }
            _ => None,
        };
        Ok(Term::Literal {
            lexical: lexical.into(),
            annotation: annotation.map(Into::into),
        })
    }

    /// Decodes `\uXXXX` or `\UXXXXXXXX`; the backslash is already consumed.
    fn unicode_escape(&mut self) -> Result<char, SyntaxError> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("expected \\u or \\U escape")),
        };
        let mut code = 0u32;
        for _ in 0..width {
            let d = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.error("invalid hex digit in escape"))?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a valid code point"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_triple() {
        let d = parse_ntriples("<http://x/s> <http://x/p> <http://x/o> .").unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn empty_input() {
        assert!(parse_ntriples("").unwrap().is_empty());
        assert!(parse_ntriples("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn literals_and_blanks() {
        let text = concat!(
            "_:b1 <http://x/p> \"a\\tb\"@en-GB .\n",
            "_:b1 <http://x/q> \"1986\"^^<http://www.w3.org/2001/XMLSchema#integer> . # trailing\n",
            "<http://x/s\\u0041> <http://x/p> _:b2.\n",
        );
        let d = parse_ntriples(text).unwrap();
        assert_eq!(d.len(), 3);
        let t = d.triples().next().unwrap();
        assert_eq!(t.object, Term::lang_literal("a\tb", "en-GB"));
        assert!(d
            .triples()
            .any(|t| t.subject == Term::iri("http://x/sA") && t.object == Term::blank("b2")));
    }

    #[test]
    fn duplicates_collapse() {
        let line = "<http://x/s> <http://x/p> <http://x/o> .\n";
        let d = parse_ntriples(&line.repeat(3)).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text =
            "<http://x/s> <http://x/p> <http://x/o> .\n<http://x/s> \"lit\" <http://x/o> .\n";
        let err = parse_ntriples(text).unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.column, 14);

        let err = parse_ntriples("<http://x/s> <http://x/p> <http://x/o>").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.contains("'.'"));

        assert!(parse_ntriples("\"s\" <http://x/p> <http://x/o> .").is_err());
        assert!(parse_ntriples("<http://x/ s> <http://x/p> <http://x/o> .").is_err());
        assert!(parse_ntriples("<> <http://x/p> <http://x/o> .").is_err());
    }

    #[test]
    fn term_round_trip() {
        for t in [
            Term::iri("http://dbpedia.org/resource/Non-Stop_(film)"),
            Term::blank("o"),
            Term::lang_literal("quote \" and \\ slash", "en"),
            Term::typed_literal("3", crate::term::XSD_INTEGER),
        ] {
            assert_eq!(parse_term(&t.to_ntriples()).unwrap(), t);
        }
    }
}
