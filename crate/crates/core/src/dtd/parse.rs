//! Recursive-descent parser for the supported DTD subset.

use indexmap::IndexMap;

use super::{
    AttDef, AttDefault, AttType, ContentModel, DtdAst, DtdError, GroupKind, Multiplicity, Particle,
    Term,
};

/// Parses DTD source text. Comments, processing instructions and whitespace
/// are skipped; declaration order is preserved in the AST. Everything outside
/// the supported subset is a hard error, never silently dropped.
pub fn parse_dtd(text: &str) -> Result<DtdAst, DtdError> {
    let mut cur = Cursor::new(text);
    let mut elements: IndexMap<String, ContentModel> = IndexMap::new();
    let mut attlists: IndexMap<String, Vec<AttDef>> = IndexMap::new();

    loop {
        cur.skip_trivia()?;
        if cur.at_end() {
            break;
        }
        if cur.peek() == Some('%') {
            return Err(DtdError::UnsupportedFeature("parameter entities".into()));
        }
        cur.expect('<')?;
        cur.expect('!')?;
        if cur.peek() == Some('[') {
            return Err(DtdError::UnsupportedFeature("conditional sections".into()));
        }
        let keyword = cur.word("declaration keyword")?;
        match keyword.as_str() {
            "ELEMENT" => {
                let (name, model) = element_decl(&mut cur)?;
                if elements.contains_key(&name) {
                    return Err(DtdError::DuplicateElement(name));
                }
                elements.insert(name, model);
            }
            "ATTLIST" => {
                let (name, defs) = attlist_decl(&mut cur)?;
                let merged = attlists.entry(name).or_default();
                for def in defs {
                    // first binding wins, as in XML attribute-list merging
                    if !merged.iter().any(|d| d.name == def.name) {
                        merged.push(def);
                    }
                }
            }
            "ENTITY" => return Err(DtdError::UnsupportedFeature("entity declarations".into())),
            "NOTATION" => return Err(DtdError::UnsupportedFeature("notation declarations".into())),
            _ => return Err(cur.expected("ELEMENT or ATTLIST declaration")),
        }
    }

    // referential integrity: content models and attribute lists may only
    // mention declared elements
    for model in elements.values() {
        for name in DtdAst::referenced_names(model) {
            if !elements.contains_key(name) {
                return Err(DtdError::DanglingReference(name.to_string()));
            }
        }
    }
    for name in attlists.keys() {
        if !elements.contains_key(name) {
            return Err(DtdError::DanglingReference(name.clone()));
        }
    }

    Ok(DtdAst { elements, attlists })
}

fn element_decl(cur: &mut Cursor) -> Result<(String, ContentModel), DtdError> {
    cur.ws1()?;
    let name = cur.name()?;
    cur.ws1()?;
    let model = content_spec(cur)?;
    cur.skip_trivia()?;
    cur.expect('>')?;
    Ok((name, model))
}

fn content_spec(cur: &mut Cursor) -> Result<ContentModel, DtdError> {
    if cur.peek() == Some('(') {
        cur.bump();
        cur.skip_trivia()?;
        if cur.peek() == Some('#') {
            cur.bump();
            let kw = cur.word("PCDATA")?;
            if kw != "PCDATA" {
                return Err(cur.expected("PCDATA"));
            }
            cur.skip_trivia()?;
            match cur.peek() {
                Some(')') => {
                    cur.bump();
                    if cur.peek() == Some('*') {
                        cur.bump();
                    }
                    Ok(ContentModel::PcdataOnly)
                }
                Some('|') => Err(DtdError::UnsupportedFeature(
                    "mixed content with element names".into(),
                )),
                _ => Err(cur.expected("')' or '|'")),
            }
        } else {
            let term = group_body(cur)?;
            let rep = multiplicity(cur);
            Ok(ContentModel::Children(Particle { term, rep }))
        }
    } else {
        let kw = cur.word("EMPTY, ANY or a content group")?;
        match kw.as_str() {
            "EMPTY" => Ok(ContentModel::Empty),
            "ANY" => Err(DtdError::UnsupportedFeature("ANY content".into())),
            _ => Err(cur.expected("EMPTY, ANY or a content group")),
        }
    }
}

/// Parses the inside of a group; the opening `(` is already consumed.
fn group_body(cur: &mut Cursor) -> Result<Term, DtdError> {
    let mut items = vec![particle(cur)?];
    let mut sep: Option<char> = None;
    loop {
        cur.skip_trivia()?;
        match cur.peek() {
            Some(')') => {
                cur.bump();
                break;
            }
            Some(c @ (',' | '|')) => {
                if sep.is_some_and(|s| s != c) {
                    return Err(cur.expected("a single separator kind per group"));
                }
                sep = Some(c);
                cur.bump();
                cur.skip_trivia()?;
                items.push(particle(cur)?);
            }
            _ => return Err(cur.expected("',', '|' or ')'")),
        }
    }
    let kind = if sep == Some('|') {
        GroupKind::Choice
    } else {
        GroupKind::Sequence
    };
    Ok(Term::Group { kind, items })
}

fn particle(cur: &mut Cursor) -> Result<Particle, DtdError> {
    let term = if cur.peek() == Some('(') {
        cur.bump();
        cur.skip_trivia()?;
        if cur.peek() == Some('#') {
            return Err(DtdError::UnsupportedFeature(
                "mixed content with element names".into(),
            ));
        }
        group_body(cur)?
    } else {
        Term::Name(cur.name()?)
    };
    Ok(Particle {
        term,
        rep: multiplicity(cur),
    })
}

fn multiplicity(cur: &mut Cursor) -> Multiplicity {
    let rep = match cur.peek() {
        Some('?') => Multiplicity::Optional,
        Some('*') => Multiplicity::Star,
        Some('+') => Multiplicity::Plus,
        _ => return Multiplicity::One,
    };
    cur.bump();
    rep
}

fn attlist_decl(cur: &mut Cursor) -> Result<(String, Vec<AttDef>), DtdError> {
    cur.ws1()?;
    let element = cur.name()?;
    let mut defs = Vec::new();
    loop {
        cur.skip_trivia()?;
        if cur.peek() == Some('>') {
            cur.bump();
            break;
        }
        let name = cur.name()?;
        cur.ws1()?;
        let ty = att_type(cur)?;
        cur.ws1()?;
        let default = att_default(cur)?;
        defs.push(AttDef { name, ty, default });
    }
    Ok((element, defs))
}

fn att_type(cur: &mut Cursor) -> Result<AttType, DtdError> {
    if cur.peek() == Some('(') {
        cur.bump();
        let mut values = Vec::new();
        loop {
            cur.skip_trivia()?;
            values.push(cur.nmtoken()?);
            cur.skip_trivia()?;
            match cur.peek() {
                Some('|') => {
                    cur.bump();
                }
                Some(')') => {
                    cur.bump();
                    return Ok(AttType::Enumerated(values));
                }
                _ => return Err(cur.expected("'|' or ')'")),
            }
        }
    }
    let kw = cur.word("attribute type")?;
    match kw.as_str() {
        "CDATA" => Ok(AttType::Cdata),
        "ID" | "IDREF" | "IDREFS" => Err(DtdError::UnsupportedFeature(
            "ID/IDREF attribute types".into(),
        )),
        "ENTITY" | "ENTITIES" => Err(DtdError::UnsupportedFeature(
            "entity attribute types".into(),
        )),
        "NMTOKEN" | "NMTOKENS" => Err(DtdError::UnsupportedFeature(
            "NMTOKEN attribute types".into(),
        )),
        "NOTATION" => Err(DtdError::UnsupportedFeature(
            "NOTATION attribute types".into(),
        )),
        _ => Err(cur.expected("CDATA or an enumeration")),
    }
}

fn att_default(cur: &mut Cursor) -> Result<AttDefault, DtdError> {
    match cur.peek() {
        Some('#') => {
            cur.bump();
            let kw = cur.word("REQUIRED, IMPLIED or FIXED")?;
            match kw.as_str() {
                "REQUIRED" => Ok(AttDefault::Required),
                "IMPLIED" => Ok(AttDefault::Implied),
                "FIXED" => {
                    cur.ws1()?;
                    Ok(AttDefault::Fixed(cur.quoted()?))
                }
                _ => Err(cur.expected("REQUIRED, IMPLIED or FIXED")),
            }
        }
        Some('"' | '\'') => Err(DtdError::UnsupportedFeature(
            "attribute default values without #FIXED".into(),
        )),
        _ => Err(cur.expected("'#REQUIRED', '#IMPLIED' or '#FIXED'")),
    }
}

struct Cursor<'a> {
    rest: std::str::Chars<'a>,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor {
            rest: src.chars(),
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.rest.clone().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest.clone().nth(1)
    }

    fn at_end(&self) -> bool {
        self.peek().is_none()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.rest.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn expected(&self, what: &str) -> DtdError {
        DtdError::SyntaxError {
            line: self.line,
            column: self.col,
            expected: what.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), DtdError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("'{c}'")))
        }
    }

    /// Skips whitespace, comments, and processing instructions.
    fn skip_trivia(&mut self) -> Result<(), DtdError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                Some('<') if self.peek2() == Some('!') && self.looking_at("<!--") => {
                    self.bump();
                    self.bump();
                    self.bump();
                    self.bump();
                    loop {
                        if self.looking_at("-->") {
                            self.bump();
                            self.bump();
                            self.bump();
                            break;
                        }
                        if self.bump().is_none() {
                            return Err(self.expected("'-->'"));
                        }
                    }
                }
                Some('<') if self.peek2() == Some('?') => {
                    self.bump();
                    self.bump();
                    loop {
                        if self.looking_at("?>") {
                            self.bump();
                            self.bump();
                            break;
                        }
                        if self.bump().is_none() {
                            return Err(self.expected("'?>'"));
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn looking_at(&self, s: &str) -> bool {
        self.rest.as_str().starts_with(s)
    }

    /// At least one whitespace character (comments also qualify as padding).
    fn ws1(&mut self) -> Result<(), DtdError> {
        if !self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            return Err(self.expected("whitespace"));
        }
        self.skip_trivia()
    }

    fn name(&mut self) -> Result<String, DtdError> {
        if !self
            .peek()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        {
            return Err(self.expected("a name"));
        }
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    /// Like [`Cursor::name`] but digits may lead (enumeration tokens).
    fn nmtoken(&mut self) -> Result<String, DtdError> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if out.is_empty() {
            return Err(self.expected("a token"));
        }
        Ok(out)
    }

    /// An all-caps keyword made of ASCII letters.
    fn word(&mut self, expected: &str) -> Result<String, DtdError> {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphabetic() {
                out.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if out.is_empty() {
            return Err(self.expected(expected));
        }
        Ok(out)
    }

    fn quoted(&mut self) -> Result<String, DtdError> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.expected("a quoted value")),
        };
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
                None => return Err(self.expected(&format!("closing {quote}"))),
            }
        }
    }
}
