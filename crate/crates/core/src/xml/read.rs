//! Strict, non-validating XML reader for the subset the writer emits:
//! UTF-8, no namespaces, no CDATA, the five predefined entities plus numeric
//! character references. A DOCTYPE declaration is tolerated and skipped.

use indexmap::IndexMap;

use super::{Element, Node, XmlDocument, XmlError};

pub fn read_xml(text: &str) -> Result<XmlDocument, XmlError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut cur = Cursor::new(text);
    cur.skip_prolog()?;
    let root = cur.element()?;
    cur.skip_misc()?;
    if !cur.at_end() {
        return Err(cur.expected("end of document"));
    }
    Ok(XmlDocument { root })
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

    fn at_end(&self) -> bool {
        self.peek().is_none()
    }

    fn looking_at(&self, s: &str) -> bool {
        self.rest.as_str().starts_with(s)
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

    fn eat(&mut self, s: &str) -> bool {
        if self.looking_at(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expected(&self, what: &str) -> XmlError {
        XmlError::Syntax {
            line: self.line,
            column: self.col,
            expected: what.into(),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), XmlError> {
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&format!("'{c}'")))
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.bump();
        }
    }

    fn skip_comment(&mut self) -> Result<(), XmlError> {
        // caller has seen "<!--"
        self.eat("<!--");
        loop {
            if self.eat("-->") {
                return Ok(());
            }
            if self.bump().is_none() {
                return Err(self.expected("'-->'"));
            }
        }
    }

    fn skip_pi(&mut self) -> Result<(), XmlError> {
        self.eat("<?");
        loop {
            if self.eat("?>") {
                return Ok(());
            }
            if self.bump().is_none() {
                return Err(self.expected("'?>'"));
            }
        }
    }

    fn skip_doctype(&mut self) -> Result<(), XmlError> {
        self.eat("<!DOCTYPE");
        let mut bracket_depth = 0usize;
        loop {
            match self.peek() {
                Some('[') => {
                    bracket_depth += 1;
                    self.bump();
                }
                Some(']') => {
                    bracket_depth = bracket_depth.saturating_sub(1);
                    self.bump();
                }
                Some('>') if bracket_depth == 0 => {
                    self.bump();
                    return Ok(());
                }
                Some(_) => {
                    self.bump();
                }
                None => return Err(self.expected("'>' closing DOCTYPE")),
            }
        }
    }

    fn skip_prolog(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.looking_at("<?") {
                self.skip_pi()?;
            } else if self.looking_at("<!--") {
                self.skip_comment()?;
            } else if self.looking_at("<!DOCTYPE") {
                self.skip_doctype()?;
            } else {
                return Ok(());
            }
        }
    }

    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.looking_at("<!--") {
                self.skip_comment()?;
            } else if self.looking_at("<?") {
                self.skip_pi()?;
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
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

    fn element(&mut self) -> Result<Element, XmlError> {
        self.expect('<')?;
        let name = self.name()?;
        let mut attributes = IndexMap::new();
        loop {
            let had_ws = self.peek().is_some_and(|c| c.is_ascii_whitespace());
            self.skip_ws();
            match self.peek() {
                Some('/') => {
                    self.bump();
                    self.expect('>')?;
                    return Ok(Element {
                        name,
                        attributes,
                        children: Vec::new(),
                    });
                }
                Some('>') => {
                    self.bump();
                    break;
                }
                Some(_) if had_ws => {
                    let att = self.name()?;
                    self.skip_ws();
                    self.expect('=')?;
                    self.skip_ws();
                    let value = self.att_value()?;
                    if attributes.insert(att, value).is_some() {
                        return Err(self.expected("unique attribute names"));
                    }
                }
                _ => return Err(self.expected("attribute, '>' or '/>'")),
            }
        }
        let children = self.content(&name)?;
        Ok(Element {
            name,
            attributes,
            children,
        })
    }

    fn content(&mut self, open_name: &str) -> Result<Vec<Node>, XmlError> {
        let mut children = Vec::new();
        let mut text = String::new();
        loop {
            match self.peek() {
                None => return Err(self.expected(&format!("'</{open_name}>'"))),
                Some('<') => {
                    if self.looking_at("<!--") {
                        self.skip_comment()?;
                        continue;
                    }
                    if self.looking_at("<![") {
                        return Err(self.expected("element content without CDATA sections"));
                    }
                    if self.looking_at("<?") {
                        self.skip_pi()?;
                        continue;
                    }
                    if !text.is_empty() {
                        children.push(Node::Text(std::mem::take(&mut text)));
                    }
                    if self.looking_at("</") {
                        self.eat("</");
                        let close = self.name()?;
                        if close != open_name {
                            return Err(self.expected(&format!("'</{open_name}>'")));
                        }
                        self.skip_ws();
                        self.expect('>')?;
                        return Ok(children);
                    }
                    children.push(Node::Element(self.element()?));
                }
                Some('&') => text.push(self.entity()?),
                Some('\r') => {
                    // XML 1.0 end-of-line normalization
                    self.bump();
                    if self.peek() == Some('\n') {
                        self.bump();
                    }
                    text.push('\n');
                }
                Some(c) => {
                    text.push(c);
                    self.bump();
                }
            }
        }
    }

    fn entity(&mut self) -> Result<char, XmlError> {
        self.expect('&')?;
        if self.eat("#x") || self.eat("#X") {
            let digits = self.until_semicolon()?;
            return u32::from_str_radix(&digits, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| self.expected("a valid character reference"));
        }
        if self.eat("#") {
            let digits = self.until_semicolon()?;
            return digits
                .parse::<u32>()
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| self.expected("a valid character reference"));
        }
        let name = self.until_semicolon()?;
        match name.as_str() {
            "amp" => Ok('&'),
            "lt" => Ok('<'),
            "gt" => Ok('>'),
            "quot" => Ok('"'),
            "apos" => Ok('\''),
            _ => Err(self.expected("a predefined entity")),
        }
    }

    fn until_semicolon(&mut self) -> Result<String, XmlError> {
        let mut out = String::new();
        loop {
            match self.peek() {
                Some(';') => {
                    self.bump();
                    return Ok(out);
                }
                Some(c) if out.len() < 8 => {
                    out.push(c);
                    self.bump();
                }
                _ => return Err(self.expected("';'")),
            }
        }
    }

    fn att_value(&mut self) -> Result<String, XmlError> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.expected("a quoted attribute value")),
        };
        self.bump();
        let mut out = String::new();
        loop {
            match self.peek() {
                Some(c) if c == quote => {
                    self.bump();
                    return Ok(out);
                }
                Some('&') => out.push(self.entity()?),
                Some('<') => return Err(self.expected("attribute value without '<'")),
                Some(_) => out.push(self.bump().unwrap()),
                None => return Err(self.expected(&format!("closing {quote}"))),
            }
        }
    }
}
