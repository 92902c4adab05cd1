//! RDF terms and triples.

use std::fmt;
use std::sync::Arc;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";

/// An RDF term. Strings are reference counted so that cloning terms while
/// building solution mappings stays cheap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Arc<str>),
    Blank(Arc<str>),
    /// `annotation` holds the language tag (`@en`) or datatype (`^^<iri>`)
    /// exactly as written; literals compare byte-wise on both parts.
    Literal {
        lexical: Arc<str>,
        annotation: Option<Arc<str>>,
    },
}

impl Term {
    pub fn iri(value: impl AsRef<str>) -> Self {
        Term::Iri(Arc::from(value.as_ref()))
    }

    pub fn blank(id: impl AsRef<str>) -> Self {
        Term::Blank(Arc::from(id.as_ref()))
    }

    pub fn literal(lexical: impl AsRef<str>) -> Self {
        Term::Literal {
            lexical: Arc::from(lexical.as_ref()),
            annotation: None,
        }
    }

    pub fn lang_literal(lexical: impl AsRef<str>, lang: &str) -> Self {
        Term::Literal {
            lexical: Arc::from(lexical.as_ref()),
            annotation: Some(Arc::from(format!("@{lang}"))),
        }
    }

    pub fn typed_literal(lexical: impl AsRef<str>, datatype: &str) -> Self {
        Term::Literal {
            lexical: Arc::from(lexical.as_ref()),
            annotation: Some(Arc::from(format!("^^<{datatype}>"))),
        }
    }

    pub fn rdf_type() -> Self {
        Term::iri(RDF_TYPE)
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(v) => Some(v),
            _ => None,
        }
    }

    /// IRI string, blank-node id, or literal lexical form.
    pub fn value(&self) -> &str {
        match self {
            Term::Iri(v) | Term::Blank(v) => v,
            Term::Literal { lexical, .. } => lexical,
        }
    }

    /// Serializes the term in N-Triples syntax.
    pub fn to_ntriples(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(v) => {
                f.write_str("<")?;
                for c in v.chars() {
                    match c {
                        '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' => {
                            write!(f, "\\u{:04X}", c as u32)?
                        }
                        c if (c as u32) <= 0x20 => write!(f, "\\u{:04X}", c as u32)?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str(">")
            }
            Term::Blank(id) => write!(f, "_:{id}"),
            Term::Literal {
                lexical,
                annotation,
            } => {
                f.write_str("\"")?;
                write_escaped(f, lexical)?;
                f.write_str("\"")?;
                if let Some(a) = annotation {
                    f.write_str(a)?;
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn write_escaped(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\r' => f.write_str("\\r")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Term,
    pub predicate: Term,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
