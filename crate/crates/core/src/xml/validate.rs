//! DTD validation: each element's child-name sequence is matched against its
//! declared content model with an epsilon-NFA built straight from the model,
//! so `?`/`*`/`+`, nested groups and choices come out of one construction.

use std::fmt;

use crate::dtd::{
    AttDefault, AttType, ContentModel, DtdAst, GroupKind, Multiplicity, Particle, Term,
};

use super::{Element, Node, XmlDocument};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Name of the element whose content or attributes are at fault.
    pub element: String,
    /// Index of the offending child among the element's element children;
    /// for attribute problems, the index within the attribute list.
    pub position: usize,
    pub message: String,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(
                f,
                "element `{}`, position {}: {}",
                v.element, v.position, v.message
            )?;
        }
        Ok(())
    }
}

/// Checks every element of `doc` against `dtd`. The report is empty exactly
/// when the document is valid. Never fails: problems are reported, not thrown.
pub fn validate_xml(doc: &XmlDocument, dtd: &DtdAst) -> ValidationReport {
    let mut report = ValidationReport::default();
    walk(&doc.root, dtd, &mut report);
    report
}

fn walk(el: &Element, dtd: &DtdAst, report: &mut ValidationReport) {
    let Some(model) = dtd.elements.get(&el.name) else {
        report.violations.push(Violation {
            element: el.name.clone(),
            position: 0,
            message: "element is not declared".into(),
        });
        return;
    };

    check_attributes(el, dtd, report);

    match model {
        ContentModel::Empty => {
            if let Some((pos, msg)) = first_content(el) {
                report.violations.push(Violation {
                    element: el.name.clone(),
                    position: pos,
                    message: format!("declared EMPTY but contains {msg}"),
                });
            }
        }
        ContentModel::PcdataOnly => {
            if let Some(pos) = el.child_elements().enumerate().map(|(i, _)| i).next() {
                report.violations.push(Violation {
                    element: el.name.clone(),
                    position: pos,
                    message: "character-data element contains child elements".into(),
                });
            }
        }
        ContentModel::Children(particle) => {
            check_stray_text(el, report);
            let names: Vec<&str> = el.child_elements().map(|c| c.name.as_str()).collect();
            if let Err(v) = Matcher::new(particle).run(&names) {
                report.violations.push(Violation {
                    element: el.name.clone(),
                    position: v.position,
                    message: v.message,
                });
            }
        }
    }

    for child in el.child_elements() {
        walk(child, dtd, report);
    }
}

/// First offending content of an EMPTY-declared element.
fn first_content(el: &Element) -> Option<(usize, String)> {
    let mut elem_idx = 0;
    for node in &el.children {
        match node {
            Node::Element(c) => return Some((elem_idx, format!("element `{}`", c.name))),
            Node::Text(t) if !t.trim().is_empty() => {
                return Some((elem_idx, "character data".into()))
            }
            Node::Text(_) => {}
        }
        if matches!(node, Node::Element(_)) {
            elem_idx += 1;
        }
    }
    None
}

fn check_stray_text(el: &Element, report: &mut ValidationReport) {
    let mut elem_idx = 0;
    for node in &el.children {
        match node {
            Node::Element(_) => elem_idx += 1,
            Node::Text(t) => {
                if !t.trim().is_empty() {
                    report.violations.push(Violation {
                        element: el.name.clone(),
                        position: elem_idx,
                        message: "character data in element-only content".into(),
                    });
                }
            }
        }
    }
}

fn check_attributes(el: &Element, dtd: &DtdAst, report: &mut ValidationReport) {
    let defs = dtd.atts_of(&el.name);
    for (idx, (name, value)) in el.attributes.iter().enumerate() {
        let Some(def) = defs.iter().find(|d| &d.name == name) else {
            report.violations.push(Violation {
                element: el.name.clone(),
                position: idx,
                message: format!("attribute `{name}` is not declared"),
            });
            continue;
        };
        if let AttType::Enumerated(allowed) = &def.ty {
            if !allowed.contains(value) {
                report.violations.push(Violation {
                    element: el.name.clone(),
                    position: idx,
                    message: format!(
                        "attribute `{name}` has value `{value}`, allowed: {}",
                        allowed.join(", ")
                    ),
                });
            }
        }
        if let AttDefault::Fixed(fixed) = &def.default {
            if value != fixed {
                report.violations.push(Violation {
                    element: el.name.clone(),
                    position: idx,
                    message: format!("attribute `{name}` must be fixed to `{fixed}`"),
                });
            }
        }
    }
    for (idx, def) in defs.iter().enumerate() {
        if def.default == AttDefault::Required && !el.attributes.contains_key(&def.name) {
            report.violations.push(Violation {
                element: el.name.clone(),
                position: idx,
                message: format!("missing required attribute `{}`", def.name),
            });
        }
    }
}

/// Does `names` belong to the language of `model`? Convenience entry used by
/// the matcher-equivalence tests; `validate_xml` goes through the same NFA.
pub fn content_model_accepts(model: &ContentModel, names: &[&str]) -> bool {
    match model {
        ContentModel::Empty => names.is_empty(),
        ContentModel::PcdataOnly => names.is_empty(),
        ContentModel::Children(p) => Matcher::new(p).run(names).is_ok(),
    }
}

struct ContentViolation {
    position: usize,
    message: String,
}

/// Epsilon-NFA over child names.
struct Matcher {
    /// labelled transitions: (from, name, to)
    edges: Vec<(usize, String, usize)>,
    eps: Vec<Vec<usize>>,
    start: usize,
    accept: usize,
}

impl Matcher {
    fn new(particle: &Particle) -> Self {
        let mut m = Matcher {
            edges: Vec::new(),
            eps: vec![Vec::new(), Vec::new()],
            start: 0,
            accept: 1,
        };
        let (s, e) = m.build(particle);
        m.eps[0].push(s);
        m.eps[e].push(1);
        m
    }

    fn fresh(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.eps.len() - 1
    }

    fn build(&mut self, p: &Particle) -> (usize, usize) {
        let (bs, be) = match &p.term {
            Term::Name(n) => {
                let s = self.fresh();
                let e = self.fresh();
                self.edges.push((s, n.clone(), e));
                (s, e)
            }
            Term::Group {
                kind: GroupKind::Sequence,
                items,
            } => {
                let s = self.fresh();
                let mut prev = s;
                for item in items {
                    let (is, ie) = self.build(item);
                    self.eps[prev].push(is);
                    prev = ie;
                }
                (s, prev)
            }
            Term::Group {
                kind: GroupKind::Choice,
                items,
            } => {
                let s = self.fresh();
                let e = self.fresh();
                for item in items {
                    let (is, ie) = self.build(item);
                    self.eps[s].push(is);
                    self.eps[ie].push(e);
                }
                (s, e)
            }
        };
        match p.rep {
            Multiplicity::One => (bs, be),
            Multiplicity::Optional => {
                let s = self.fresh();
                let e = self.fresh();
                self.eps[s].push(bs);
                self.eps[be].push(e);
                self.eps[s].push(e);
                (s, e)
            }
            Multiplicity::Star => {
                let s = self.fresh();
                let e = self.fresh();
                self.eps[s].push(bs);
                self.eps[be].push(e);
                self.eps[s].push(e);
                self.eps[be].push(bs);
                (s, e)
            }
            Multiplicity::Plus => {
                let s = self.fresh();
                let e = self.fresh();
                self.eps[s].push(bs);
                self.eps[be].push(e);
                self.eps[be].push(bs);
                (s, e)
            }
        }
    }

    fn closure(&self, states: &mut [bool]) {
        let mut stack: Vec<usize> = states
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(i, _)| i)
            .collect();
        while let Some(s) = stack.pop() {
            for &t in &self.eps[s] {
                if !states[t] {
                    states[t] = true;
                    stack.push(t);
                }
            }
        }
    }

    /// Sorted, deduplicated names leaving the current state set, for error text.
    fn expected(&self, states: &[bool]) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .edges
            .iter()
            .filter(|(from, _, _)| states[*from])
            .map(|(_, n, _)| n.as_str())
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    fn run(&self, names: &[&str]) -> Result<(), ContentViolation> {
        let mut states = vec![false; self.eps.len()];
        states[self.start] = true;
        self.closure(&mut states);
        for (i, name) in names.iter().enumerate() {
            let mut next = vec![false; self.eps.len()];
            let mut any = false;
            for (from, label, to) in &self.edges {
                if states[*from] && label == name {
                    next[*to] = true;
                    any = true;
                }
            }
            if !any {
                let mut exp: Vec<String> = self
                    .expected(&states)
                    .into_iter()
                    .map(|n| format!("`{n}`"))
                    .collect();
                if states[self.accept] {
                    exp.push("end of element".into());
                }
                return Err(ContentViolation {
                    position: i,
                    message: format!("unexpected child `{name}`, expected {}", exp.join(" or ")),
                });
            }
            self.closure(&mut next);
            states = next;
        }
        if states[self.accept] {
            Ok(())
        } else {
            let exp: Vec<String> = self
                .expected(&states)
                .into_iter()
                .map(|n| format!("`{n}`"))
                .collect();
            Err(ContentViolation {
                position: names.len(),
                message: format!("content ends too early, expected {}", exp.join(" or ")),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::parse_dtd;
    use crate::xml::read_xml;

    fn accepts(dtd_src: &str, element: &str, names: &[&str]) -> bool {
        let ast = parse_dtd(dtd_src).unwrap();
        content_model_accepts(&ast.elements[element], names)
    }

    #[test]
    fn basic_regular_operators() {
        let d = "<!ELEMENT a (b, c*, d?)><!ELEMENT b EMPTY><!ELEMENT c EMPTY><!ELEMENT d EMPTY>";
        assert!(accepts(d, "a", &["b"]));
        assert!(accepts(d, "a", &["b", "c", "c", "d"]));
        assert!(!accepts(d, "a", &[]));
        assert!(!accepts(d, "a", &["b", "d", "c"]));
        assert!(!accepts(d, "a", &["b", "d", "d"]));
    }

    #[test]
    fn optional_rejects_repetition() {
        let d = "<!ELEMENT a (c?)><!ELEMENT c EMPTY>";
        assert!(accepts(d, "a", &[]));
        assert!(accepts(d, "a", &["c"]));
        assert!(!accepts(d, "a", &["c", "c"]));
    }

    #[test]
    fn nested_choice_with_plus() {
        let d = "<!ELEMENT a ((b | c)+, b?)><!ELEMENT b EMPTY><!ELEMENT c EMPTY>";
        assert!(accepts(d, "a", &["c", "b"]));
        assert!(accepts(d, "a", &["b", "b", "b"]));
        assert!(accepts(d, "a", &["c", "c", "b"]));
        assert!(!accepts(d, "a", &[]));
    }

    #[test]
    fn report_pinpoints_missing_mandatory_child() {
        let dtd =
            parse_dtd("<!ELEMENT a (b, c)><!ELEMENT b (#PCDATA)><!ELEMENT c (#PCDATA)>").unwrap();
        let doc = read_xml("<a><b>x</b></a>").unwrap();
        let report = validate_xml(&doc, &dtd);
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!((v.element.as_str(), v.position), ("a", 1));
        assert!(v.message.contains("`c`"), "{}", v.message);
    }

    #[test]
    fn attribute_rules_are_enforced() {
        let dtd = parse_dtd(
            "<!ELEMENT col EMPTY>\
             <!ATTLIST col name CDATA #REQUIRED kind (i | r) #IMPLIED u CDATA #FIXED \"px\">",
        )
        .unwrap();
        let valid = read_xml("<col name=\"a\" kind=\"i\" u=\"px\"/>").unwrap();
        assert!(validate_xml(&valid, &dtd).is_valid());
        // fixed attribute omitted entirely is fine
        let omitted = read_xml("<col name=\"a\"/>").unwrap();
        assert!(validate_xml(&omitted, &dtd).is_valid());

        let missing = read_xml("<col kind=\"i\"/>").unwrap();
        let bad_enum = read_xml("<col name=\"a\" kind=\"x\"/>").unwrap();
        let bad_fixed = read_xml("<col name=\"a\" u=\"em\"/>").unwrap();
        let undeclared = read_xml("<col name=\"a\" extra=\"1\"/>").unwrap();
        for doc in [&missing, &bad_enum, &bad_fixed, &undeclared] {
            assert_eq!(validate_xml(doc, &dtd).violations.len(), 1);
        }
    }

    #[test]
    fn character_data_placement() {
        let dtd = parse_dtd("<!ELEMENT a (b)><!ELEMENT b (#PCDATA)>").unwrap();
        // layout whitespace between elements is fine
        let ok = read_xml("<a>\n  <b>t</b>\n</a>").unwrap();
        assert!(validate_xml(&ok, &dtd).is_valid());
        let stray = read_xml("<a>oops<b>t</b></a>").unwrap();
        assert!(!validate_xml(&stray, &dtd).is_valid());
        let nested = read_xml("<a><b><a></a></b></a>").unwrap();
        assert!(!validate_xml(&nested, &dtd).is_valid());
    }

    #[test]
    fn empty_model_allows_nothing() {
        let dtd = parse_dtd("<!ELEMENT a EMPTY>").unwrap();
        assert!(validate_xml(&read_xml("<a/>").unwrap(), &dtd).is_valid());
        assert!(validate_xml(&read_xml("<a></a>").unwrap(), &dtd).is_valid());
        assert!(!validate_xml(&read_xml("<a>x</a>").unwrap(), &dtd).is_valid());
    }

    #[test]
    fn undeclared_element_is_reported_once() {
        let dtd = parse_dtd("<!ELEMENT a EMPTY>").unwrap();
        let report = validate_xml(&read_xml("<ghost><boo/></ghost>").unwrap(), &dtd);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].element, "ghost");
    }
}
