//! XML document model, strict reader/writer, DTD validation, and the fixed
//! complex-object DTD that the emitter and the relational mapper share.

use indexmap::IndexMap;
use thiserror::Error;

use crate::dtd::{parse_dtd, AttDefault, ContentModel, DtdAst};

mod emit;
mod read;
mod validate;
mod write;

pub use emit::{emit_xml, EmitError};
pub use read::read_xml;
pub use validate::{content_model_accepts, validate_xml, ValidationReport, Violation};
pub use write::write_xml;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlDocument {
    pub root: Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attributes: IndexMap<String, String>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Element(Element),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("syntax error at line {line}, column {column}: expected {expected}")]
    Syntax {
        line: u32,
        column: u32,
        expected: String,
    },
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            attributes: IndexMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_text(name: impl Into<String>, text: impl Into<String>) -> Self {
        let mut el = Element::new(name);
        let text = text.into();
        if !text.is_empty() {
            el.children.push(Node::Text(text));
        }
        el
    }

    pub fn child_elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    /// Concatenated text content of direct text children.
    pub fn text(&self) -> String {
        self.children
            .iter()
            .filter_map(|n| match n {
                Node::Text(t) => Some(t.as_str()),
                Node::Element(_) => None,
            })
            .collect()
    }

    /// True if the element has no children at all (`<e/>` or `<e></e>`).
    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rewrites a document into its canonical form: attributes sorted by name,
/// adjacent text nodes merged, whitespace-only text dropped everywhere except
/// inside PCDATA leaves, and empty text nodes removed. Canonical equality is
/// the round-trip criterion: it ignores formatting differences while
/// preserving every value the relational mapping can represent.
pub fn canonicalize(doc: &XmlDocument, dtd: &DtdAst) -> XmlDocument {
    XmlDocument {
        root: canonicalize_element(&doc.root, dtd),
    }
}

fn canonicalize_element(el: &Element, dtd: &DtdAst) -> Element {
    let pcdata = matches!(dtd.elements.get(&el.name), Some(ContentModel::PcdataOnly));
    let mut attributes: Vec<(String, String)> = el
        .attributes
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    // Omitted fixed attributes are logically present with their declared
    // value; make that explicit.
    for att in dtd.atts_of(&el.name) {
        if let AttDefault::Fixed(value) = &att.default {
            if !attributes.iter().any(|(k, _)| k == &att.name) {
                attributes.push((att.name.clone(), value.clone()));
            }
        }
    }
    attributes.sort_by(|a, b| a.0.cmp(&b.0));

    let mut children: Vec<Node> = Vec::new();
    for node in &el.children {
        match node {
            Node::Element(c) => children.push(Node::Element(canonicalize_element(c, dtd))),
            Node::Text(t) => {
                if !pcdata && t.trim().is_empty() {
                    continue;
                }
                if let Some(Node::Text(prev)) = children.last_mut() {
                    prev.push_str(t);
                } else {
                    children.push(Node::Text(t.clone()));
                }
            }
        }
    }
    children.retain(|n| !matches!(n, Node::Text(t) if t.is_empty()));

    Element {
        name: el.name.clone(),
        attributes: attributes.into_iter().collect(),
        children,
    }
}

/// The fixed logical model: one root per complex object, general attributes
/// as leaf elements (optional ones marked `?`), a keyword list, and exactly
/// one of the five class payloads. Every extracted value is optional —
/// extraction is allowed to come up empty — so payload leaves map to
/// nullable columns. Shared measurement leaves (`width_px`, `height_px`,
/// `duration_ms`) are deliberately reused across payloads.
pub const CANONICAL_DTD_TEXT: &str = "\
<!ELEMENT complex_object (object_id, name, source_uri, class, size_bytes, created?, modified?, format, language?, keywords, author?, description?, (text | image | sound | video | relational_view))>
<!ELEMENT object_id (#PCDATA)>
<!ELEMENT name (#PCDATA)>
<!ELEMENT source_uri (#PCDATA)>
<!ELEMENT class (#PCDATA)>
<!ELEMENT size_bytes (#PCDATA)>
<!ELEMENT created (#PCDATA)>
<!ELEMENT modified (#PCDATA)>
<!ELEMENT format (#PCDATA)>
<!ELEMENT language (#PCDATA)>
<!ELEMENT keywords (keyword*)>
<!ELEMENT keyword (#PCDATA)>
<!ELEMENT author (#PCDATA)>
<!ELEMENT description (#PCDATA)>
<!ELEMENT text (encoding?, word_count?, line_count?)>
<!ELEMENT encoding (#PCDATA)>
<!ELEMENT word_count (#PCDATA)>
<!ELEMENT line_count (#PCDATA)>
<!ELEMENT image (width_px?, height_px?, bit_depth?, image_format?)>
<!ELEMENT width_px (#PCDATA)>
<!ELEMENT height_px (#PCDATA)>
<!ELEMENT bit_depth (#PCDATA)>
<!ELEMENT image_format (#PCDATA)>
<!ELEMENT sound (duration_ms?, sample_rate_hz?, channels?)>
<!ELEMENT duration_ms (#PCDATA)>
<!ELEMENT sample_rate_hz (#PCDATA)>
<!ELEMENT channels (#PCDATA)>
<!ELEMENT video (duration_ms?, width_px?, height_px?)>
<!ELEMENT relational_view (row_count?, column*)>
<!ELEMENT row_count (#PCDATA)>
<!ELEMENT column EMPTY>
<!ATTLIST column
  name CDATA #REQUIRED
  type CDATA #REQUIRED>
";

/// Root element name of [`CANONICAL_DTD_TEXT`].
pub const CANONICAL_ROOT: &str = "complex_object";

pub fn canonical_dtd() -> DtdAst {
    parse_dtd(CANONICAL_DTD_TEXT).expect("canonical DTD text parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtd::GroupKind;

    #[test]
    fn canonicalize_fills_in_omitted_fixed_attributes() {
        let dtd = parse_dtd(
            "<!ELEMENT a EMPTY>\n<!ATTLIST a rel CDATA #FIXED \"canonical\" lang CDATA #IMPLIED>",
        )
        .unwrap();
        let doc = read::read_xml("<a/>").unwrap();
        let canon = canonicalize(&doc, &dtd);
        assert_eq!(
            canon.root.attributes.get("rel").map(String::as_str),
            Some("canonical")
        );
        assert!(!canon.root.attributes.contains_key("lang"));
    }

    #[test]
    fn canonical_dtd_is_stable() {
        let ast = canonical_dtd();
        assert_eq!(ast, canonical_dtd());
        // serializing and reparsing is the identity, and the constant text is
        // already in serialized form
        assert_eq!(ast.to_string(), CANONICAL_DTD_TEXT);
        assert_eq!(parse_dtd(&ast.to_string()).unwrap(), ast);
    }

    #[test]
    fn canonical_dtd_has_one_payload_choice_with_five_members() {
        let ast = canonical_dtd();
        let model = &ast.elements[CANONICAL_ROOT];
        let names = DtdAst::referenced_names(model);
        for class in ["text", "image", "sound", "video", "relational_view"] {
            assert!(names.contains(&class), "missing {class}");
        }
        // exactly one choice group, holding exactly the five payload names
        fn find_choices<'a>(
            p: &'a crate::dtd::Particle,
            out: &mut Vec<&'a Vec<crate::dtd::Particle>>,
        ) {
            if let crate::dtd::Term::Group { kind, items } = &p.term {
                if *kind == GroupKind::Choice {
                    out.push(items);
                }
                items.iter().for_each(|i| find_choices(i, out));
            }
        }
        let crate::dtd::ContentModel::Children(p) = model else {
            panic!()
        };
        let mut choices = Vec::new();
        find_choices(p, &mut choices);
        assert_eq!(choices.len(), 1);
        assert_eq!(choices[0].len(), 5);
    }

    #[test]
    fn canonicalize_sorts_attributes_and_strips_layout_whitespace() {
        let dtd = parse_dtd(
            "<!ELEMENT a (b*)><!ELEMENT b (#PCDATA)><!ATTLIST a z CDATA #IMPLIED y CDATA #IMPLIED>",
        )
        .unwrap();
        let mut a = Element::new("a");
        a.attributes.insert("z".into(), "1".into());
        a.attributes.insert("y".into(), "2".into());
        a.children.push(Node::Text("\n  ".into()));
        a.children
            .push(Node::Element(Element::with_text("b", " x ")));
        a.children.push(Node::Text("\n".into()));
        let canon = canonicalize(&XmlDocument { root: a }, &dtd);
        let keys: Vec<_> = canon.root.attributes.keys().cloned().collect();
        assert_eq!(keys, vec!["y", "z"]);
        assert_eq!(canon.root.children.len(), 1);
        // PCDATA leaf text survives verbatim, including its spaces
        let Node::Element(b) = &canon.root.children[0] else {
            panic!()
        };
        assert_eq!(b.text(), " x ");
    }
}
