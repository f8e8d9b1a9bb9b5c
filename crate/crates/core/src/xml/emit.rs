//! Object → XML emission by recursive traversal of the schema itself: the
//! DTD dictates element order, the object supplies the values. Missing
//! optional values turn into empty elements rather than omitted ones, so the
//! document shape is the same for every object of a class.

use thiserror::Error;

use crate::dtd::{ContentModel, DtdAst, GroupKind, Particle, Term};
use crate::model::{validate, ComplexObject, SubdocumentPayload};

use super::{Element, Node, XmlDocument, CANONICAL_ROOT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("object fails validation: {0}")]
    ObjectInvalid(String),
}

/// Serializes `obj` against the schema (the fixed complex-object DTD). The
/// result always validates against `dtd`.
pub fn emit_xml(obj: &ComplexObject, dtd: &DtdAst) -> Result<XmlDocument, EmitError> {
    let report = validate(obj);
    if !report.is_valid() {
        return Err(EmitError::ObjectInvalid(report.to_string()));
    }
    Ok(XmlDocument {
        root: build(CANONICAL_ROOT, obj, dtd),
    })
}

fn build(name: &str, obj: &ComplexObject, dtd: &DtdAst) -> Element {
    let mut el = Element::new(name);
    match dtd.elements.get(name) {
        Some(ContentModel::Children(p)) => walk(p, obj, dtd, &mut el.children),
        Some(ContentModel::PcdataOnly) => {
            if let Some(text) = scalar(name, obj) {
                if !text.is_empty() {
                    el.children.push(Node::Text(text));
                }
            }
        }
        _ => {}
    }
    el
}

fn walk(p: &Particle, obj: &ComplexObject, dtd: &DtdAst, out: &mut Vec<Node>) {
    match &p.term {
        Term::Name(n) => match n.as_str() {
            // list-valued parts expand to one element per entry
            "keyword" => {
                for kw in &obj.keywords {
                    out.push(Node::Element(Element::with_text("keyword", kw.clone())));
                }
            }
            "column" => {
                if let SubdocumentPayload::RelationalView {
                    column_names,
                    column_types,
                    ..
                } = &obj.payload
                {
                    for (cn, ct) in column_names.iter().zip(column_types) {
                        let mut col = Element::new("column");
                        col.attributes.insert("name".into(), cn.clone());
                        col.attributes.insert("type".into(), ct.clone());
                        out.push(Node::Element(col));
                    }
                }
            }
            _ => out.push(Node::Element(build(n, obj, dtd))),
        },
        Term::Group {
            kind: GroupKind::Sequence,
            items,
        } => {
            for item in items {
                walk(item, obj, dtd, out);
            }
        }
        Term::Group {
            kind: GroupKind::Choice,
            items,
        } => {
            let class_name = obj.class.as_str();
            for item in items {
                if matches!(&item.term, Term::Name(n) if n == class_name) {
                    out.push(Node::Element(build(class_name, obj, dtd)));
                    return;
                }
            }
        }
    }
}

fn opt_num(v: Option<u64>) -> Option<String> {
    v.map(|n| n.to_string())
}

/// Text value for a character-data leaf; `None` and `Some("")` both render
/// as an empty element.
fn scalar(name: &str, obj: &ComplexObject) -> Option<String> {
    let general = match name {
        "object_id" => return Some(obj.object_id.to_string()),
        "name" => return Some(obj.name.clone()),
        "source_uri" => return Some(obj.source_uri.clone()),
        "class" => return Some(obj.class.as_str().into()),
        "size_bytes" => return Some(obj.size_bytes.to_string()),
        "format" => return Some(obj.format.clone()),
        "created" => obj.created.clone(),
        "modified" => obj.modified.clone(),
        "language" => obj.language.clone(),
        "author" => obj.author.clone(),
        "description" => obj.description.clone(),
        _ => None,
    };
    if general.is_some() {
        return general;
    }
    match &obj.payload {
        SubdocumentPayload::Text {
            encoding,
            word_count,
            line_count,
        } => match name {
            "encoding" => encoding.clone(),
            "word_count" => opt_num(*word_count),
            "line_count" => opt_num(*line_count),
            _ => None,
        },
        SubdocumentPayload::Image {
            width_px,
            height_px,
            bit_depth,
            image_format,
        } => match name {
            "width_px" => opt_num(*width_px),
            "height_px" => opt_num(*height_px),
            "bit_depth" => opt_num(*bit_depth),
            "image_format" => image_format.clone(),
            _ => None,
        },
        SubdocumentPayload::Sound {
            duration_ms,
            sample_rate_hz,
            channels,
        } => match name {
            "duration_ms" => opt_num(*duration_ms),
            "sample_rate_hz" => opt_num(*sample_rate_hz),
            "channels" => opt_num(*channels),
            _ => None,
        },
        SubdocumentPayload::Video {
            duration_ms,
            width_px,
            height_px,
        } => match name {
            "duration_ms" => opt_num(*duration_ms),
            "width_px" => opt_num(*width_px),
            "height_px" => opt_num(*height_px),
            _ => None,
        },
        SubdocumentPayload::RelationalView { row_count, .. } => match name {
            "row_count" => opt_num(*row_count),
            _ => None,
        },
    }
}
