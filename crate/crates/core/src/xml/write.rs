//! Serializer: UTF-8, XML 1.0, two-space indent.

use std::fmt::Write as _;

use super::{Element, Node, XmlDocument};

/// Renders the document with an XML declaration and a trailing newline.
/// Elements whose children are all elements are pretty-printed one per line;
/// any text child switches the element to inline rendering so no whitespace
/// is ever injected into character data. Empty elements use the short form.
pub fn write_xml(doc: &XmlDocument) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    element(&mut out, &doc.root, 0);
    out.push('\n');
    out
}

fn element(out: &mut String, el: &Element, depth: usize) {
    let _ = write!(out, "<{}", el.name);
    for (k, v) in &el.attributes {
        let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
    }
    if el.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    let block = el.children.iter().all(|n| matches!(n, Node::Element(_)));
    if block {
        for child in el.child_elements() {
            out.push('\n');
            out.push_str(&"  ".repeat(depth + 1));
            element(out, child, depth + 1);
        }
        out.push('\n');
        out.push_str(&"  ".repeat(depth));
    } else {
        for node in &el.children {
            match node {
                Node::Text(t) => out.push_str(&escape_text(t)),
                Node::Element(e) => element(out, e, depth),
            }
        }
    }
    let _ = write!(out, "</{}>", el.name);
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;

    #[test]
    fn nested_layout_and_escaping() {
        let mut root = Element::new("a");
        root.children
            .push(Node::Element(Element::with_text("b", "x < y & z")));
        let mut c = Element::new("c");
        c.attributes.insert("q".into(), "say \"hi\"".into());
        root.children.push(Node::Element(c));
        root.children.push(Node::Element(Element::new("d")));
        let doc = XmlDocument { root };
        assert_eq!(
            write_xml(&doc),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <a>\n  <b>x &lt; y &amp; z</b>\n  <c q=\"say &quot;hi&quot;\"/>\n  <d/>\n</a>\n"
        );
    }

    #[test]
    fn text_content_is_never_reindented() {
        let root = Element {
            name: "t".into(),
            attributes: IndexMap::new(),
            children: vec![Node::Text("line1\nline2".into())],
        };
        assert_eq!(
            write_xml(&XmlDocument { root }),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<t>line1\nline2</t>\n"
        );
    }
}
