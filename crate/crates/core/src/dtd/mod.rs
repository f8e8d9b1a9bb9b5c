//! DTD abstract syntax and parsing.
//!
//! Only the subset that maps cleanly onto relations is accepted: `ELEMENT`
//! declarations with `EMPTY`, `(#PCDATA)`, or nested sequence/choice groups,
//! and `ATTLIST` declarations with `CDATA` or enumerated types. Entities,
//! notations, ID/IDREF and mixed content are rejected up front rather than
//! half-supported.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

mod parse;

pub use parse::parse_dtd;

/// A parsed DTD, element order preserved from the source.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DtdAst {
    pub elements: IndexMap<String, ContentModel>,
    pub attlists: IndexMap<String, Vec<AttDef>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentModel {
    Empty,
    PcdataOnly,
    /// Element content: the particle is always a [`Term::Group`], since the
    /// source grammar requires parentheses around element content.
    Children(Particle),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Particle {
    pub term: Term,
    pub rep: Multiplicity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Name(String),
    Group {
        kind: GroupKind,
        items: Vec<Particle>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Sequence,
    Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    One,
    Optional,
    Star,
    Plus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttDef {
    pub name: String,
    pub ty: AttType,
    pub default: AttDefault,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttType {
    Cdata,
    Enumerated(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttDefault {
    Required,
    Implied,
    Fixed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtdError {
    #[error("syntax error at line {line}, column {column}: expected {expected}")]
    SyntaxError {
        line: u32,
        column: u32,
        expected: String,
    },
    #[error("content model references undeclared element `{0}`")]
    DanglingReference(String),
    #[error("element `{0}` declared more than once")]
    DuplicateElement(String),
    #[error("unsupported DTD feature: {0}")]
    UnsupportedFeature(String),
}

impl DtdAst {
    /// Attribute definitions for an element, empty if none were declared.
    pub fn atts_of(&self, element: &str) -> &[AttDef] {
        self.attlists.get(element).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Element names referenced by `model`, in left-to-right order, with
    /// duplicates. Empty for `EMPTY` and `(#PCDATA)`.
    pub fn referenced_names(model: &ContentModel) -> Vec<&str> {
        fn walk<'a>(p: &'a Particle, out: &mut Vec<&'a str>) {
            match &p.term {
                Term::Name(n) => out.push(n),
                Term::Group { items, .. } => items.iter().for_each(|i| walk(i, out)),
            }
        }
        let mut out = Vec::new();
        if let ContentModel::Children(p) = model {
            walk(p, &mut out);
        }
        out
    }
}

impl Multiplicity {
    pub fn suffix(self) -> &'static str {
        match self {
            Multiplicity::One => "",
            Multiplicity::Optional => "?",
            Multiplicity::Star => "*",
            Multiplicity::Plus => "+",
        }
    }

    /// May the particle be matched by zero occurrences?
    pub fn admits_zero(self) -> bool {
        matches!(self, Multiplicity::Optional | Multiplicity::Star)
    }

    /// May the particle be matched by more than one occurrence?
    pub fn admits_many(self) -> bool {
        matches!(self, Multiplicity::Star | Multiplicity::Plus)
    }
}

impl fmt::Display for Particle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.term {
            Term::Name(n) => write!(f, "{n}")?,
            Term::Group { kind, items } => {
                let sep = match kind {
                    GroupKind::Sequence => ", ",
                    GroupKind::Choice => " | ",
                };
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")?;
            }
        }
        write!(f, "{}", self.rep.suffix())
    }
}

impl fmt::Display for ContentModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContentModel::Empty => write!(f, "EMPTY"),
            ContentModel::PcdataOnly => write!(f, "(#PCDATA)"),
            ContentModel::Children(p) => write!(f, "{p}"),
        }
    }
}

/// Serializes the AST back to DTD source. `parse_dtd` of the output yields an
/// equal AST, and equal ASTs serialize to byte-identical text.
impl fmt::Display for DtdAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, model) in &self.elements {
            writeln!(f, "<!ELEMENT {name} {model}>")?;
            if let Some(atts) = self.attlists.get(name) {
                write!(f, "<!ATTLIST {name}")?;
                for att in atts {
                    let ty = match &att.ty {
                        AttType::Cdata => "CDATA".to_string(),
                        AttType::Enumerated(vals) => format!("({})", vals.join(" | ")),
                    };
                    let default = match &att.default {
                        AttDefault::Required => "#REQUIRED".to_string(),
                        AttDefault::Implied => "#IMPLIED".to_string(),
                        AttDefault::Fixed(v) => format!("#FIXED \"{v}\""),
                    };
                    write!(f, "\n  {} {ty} {default}", att.name)?;
                }
                writeln!(f, ">")?;
            }
        }
        Ok(())
    }
}
