//! The conceptual object model: one superclass of general descriptive
//! attributes plus exactly one class-specific payload per object.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdocumentClass {
    Text,
    Image,
    Sound,
    Video,
    RelationalView,
}

impl SubdocumentClass {
    pub const ALL: [SubdocumentClass; 5] = [
        SubdocumentClass::Text,
        SubdocumentClass::Image,
        SubdocumentClass::Sound,
        SubdocumentClass::Video,
        SubdocumentClass::RelationalView,
    ];

    /// Lower-case name, also the payload element name in the XML layer.
    pub fn as_str(self) -> &'static str {
        match self {
            SubdocumentClass::Text => "text",
            SubdocumentClass::Image => "image",
            SubdocumentClass::Sound => "sound",
            SubdocumentClass::Video => "video",
            SubdocumentClass::RelationalView => "relational_view",
        }
    }

    /// Payload attribute names owned by this class.
    pub fn payload_attrs(self) -> &'static [&'static str] {
        match self {
            SubdocumentClass::Text => &["encoding", "word_count", "line_count"],
            SubdocumentClass::Image => &["width_px", "height_px", "bit_depth", "image_format"],
            SubdocumentClass::Sound => &["duration_ms", "sample_rate_hz", "channels"],
            SubdocumentClass::Video => &["duration_ms", "width_px", "height_px"],
            SubdocumentClass::RelationalView => &["column_names", "column_types", "row_count"],
        }
    }
}

impl fmt::Display for SubdocumentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubdocumentClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SubdocumentClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown class `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexObject {
    pub object_id: u64,
    pub name: String,
    pub source_uri: String,
    pub class: SubdocumentClass,
    pub size_bytes: u64,
    pub created: Option<String>,
    pub modified: Option<String>,
    pub format: String,
    pub language: Option<String>,
    pub keywords: Vec<String>,
    pub author: Option<String>,
    pub description: Option<String>,
    pub payload: SubdocumentPayload,
}

/// Class-specific metadata. Fields are optional: whatever a header parser or
/// a manual entry did not supply stays absent rather than defaulting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdocumentPayload {
    Text {
        encoding: Option<String>,
        word_count: Option<u64>,
        line_count: Option<u64>,
    },
    Image {
        width_px: Option<u64>,
        height_px: Option<u64>,
        bit_depth: Option<u64>,
        image_format: Option<String>,
    },
    Sound {
        duration_ms: Option<u64>,
        sample_rate_hz: Option<u64>,
        channels: Option<u64>,
    },
    Video {
        duration_ms: Option<u64>,
        width_px: Option<u64>,
        height_px: Option<u64>,
    },
    RelationalView {
        column_names: Vec<String>,
        column_types: Vec<String>,
        row_count: Option<u64>,
    },
}

impl SubdocumentPayload {
    pub fn class(&self) -> SubdocumentClass {
        match self {
            SubdocumentPayload::Text { .. } => SubdocumentClass::Text,
            SubdocumentPayload::Image { .. } => SubdocumentClass::Image,
            SubdocumentPayload::Sound { .. } => SubdocumentClass::Sound,
            SubdocumentPayload::Video { .. } => SubdocumentClass::Video,
            SubdocumentPayload::RelationalView { .. } => SubdocumentClass::RelationalView,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Supplied by a person (manifest entry or interactive prompt).
    Manual,
    /// Read through standard means: file system metadata, extension tables.
    Standard,
    /// Produced by a format-specific extraction algorithm.
    Algorithmic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Int(u64),
    Text(String),
    List(Vec<String>),
}

impl AttrValue {
    pub fn as_u64(&self) -> Option<u64> {
        match self {
            AttrValue::Int(n) => Some(*n),
            AttrValue::Text(s) => s.parse().ok(),
            AttrValue::List(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttrValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub value: AttrValue,
    pub provenance: Provenance,
}

/// Flat bag of named attributes for one source, tagged with the class the
/// source was filed under. Names are unique except `keywords`, which may
/// repeat (one entry per keyword).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub class: SubdocumentClass,
    pub attributes: Vec<Attribute>,
}

impl AttributeSet {
    pub fn new(class: SubdocumentClass) -> Self {
        AttributeSet {
            class,
            attributes: Vec::new(),
        }
    }

    /// Appends, replacing any previous attribute of the same name (all of
    /// them, for `keywords`).
    pub fn set(&mut self, name: &str, value: AttrValue, provenance: Provenance) {
        self.attributes.retain(|a| a.name != name);
        self.attributes.push(Attribute {
            name: name.into(),
            value,
            provenance,
        });
    }

    /// Appends a keyword entry without displacing earlier ones.
    pub fn add_keyword(&mut self, keyword: impl Into<String>, provenance: Provenance) {
        self.attributes.push(Attribute {
            name: "keywords".into(),
            value: AttrValue::Text(keyword.into()),
            provenance,
        });
    }

    pub fn get(&self, name: &str) -> Option<&AttrValue> {
        self.attributes
            .iter()
            .find(|a| a.name == name)
            .map(|a| &a.value)
    }

    pub fn keywords(&self) -> Vec<String> {
        self.attributes
            .iter()
            .filter(|a| a.name == "keywords")
            .filter_map(|a| a.value.as_text().map(String::from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WrapError {
    #[error("missing mandatory attribute `{0}`")]
    MissingMandatoryAttribute(String),
    #[error("attribute `{attribute}` does not belong to class `{class}`")]
    ClassPayloadMismatch {
        class: SubdocumentClass,
        attribute: String,
    },
}

const MANDATORY: [&str; 4] = ["name", "source_uri", "size_bytes", "format"];
const GENERAL: [&str; 10] = [
    "name",
    "source_uri",
    "size_bytes",
    "format",
    "created",
    "modified",
    "language",
    "keywords",
    "author",
    "description",
];

/// Instantiates the object structure from a flat attribute set. `object_id`
/// is the caller's surrogate key: ids are handed out by the platform, never
/// taken from the sources. Optional attributes that are absent stay absent;
/// nothing is defaulted. Attribute names that belong to a different class's
/// payload are refused; names known to no class are ignored.
pub fn wrap(attrs: &AttributeSet, object_id: u64) -> Result<ComplexObject, WrapError> {
    for attr in &attrs.attributes {
        let name = attr.name.as_str();
        if GENERAL.contains(&name) || attrs.class.payload_attrs().contains(&name) {
            continue;
        }
        if SubdocumentClass::ALL
            .iter()
            .any(|c| c.payload_attrs().contains(&name))
        {
            return Err(WrapError::ClassPayloadMismatch {
                class: attrs.class,
                attribute: attr.name.clone(),
            });
        }
    }

    let text = |n: &str| attrs.get(n).and_then(|v| v.as_text().map(String::from));
    let int = |n: &str| attrs.get(n).and_then(AttrValue::as_u64);
    let list = |n: &str| match attrs.get(n) {
        Some(AttrValue::List(xs)) => xs.clone(),
        _ => Vec::new(),
    };
    let mandatory = |n: &str| -> Result<(), WrapError> {
        if attrs.get(n).is_none() {
            Err(WrapError::MissingMandatoryAttribute(n.into()))
        } else {
            Ok(())
        }
    };
    for n in MANDATORY {
        mandatory(n)?;
    }

    let payload = match attrs.class {
        SubdocumentClass::Text => SubdocumentPayload::Text {
            encoding: text("encoding"),
            word_count: int("word_count"),
            line_count: int("line_count"),
        },
        SubdocumentClass::Image => SubdocumentPayload::Image {
            width_px: int("width_px"),
            height_px: int("height_px"),
            bit_depth: int("bit_depth"),
            image_format: text("image_format"),
        },
        SubdocumentClass::Sound => SubdocumentPayload::Sound {
            duration_ms: int("duration_ms"),
            sample_rate_hz: int("sample_rate_hz"),
            channels: int("channels"),
        },
        SubdocumentClass::Video => SubdocumentPayload::Video {
            duration_ms: int("duration_ms"),
            width_px: int("width_px"),
            height_px: int("height_px"),
        },
        SubdocumentClass::RelationalView => SubdocumentPayload::RelationalView {
            column_names: list("column_names"),
            column_types: list("column_types"),
            row_count: int("row_count"),
        },
    };

    Ok(ComplexObject {
        object_id,
        name: text("name").ok_or_else(|| WrapError::MissingMandatoryAttribute("name".into()))?,
        source_uri: text("source_uri")
            .ok_or_else(|| WrapError::MissingMandatoryAttribute("source_uri".into()))?,
        class: attrs.class,
        size_bytes: int("size_bytes")
            .ok_or_else(|| WrapError::MissingMandatoryAttribute("size_bytes".into()))?,
        created: text("created"),
        modified: text("modified"),
        format: text("format")
            .ok_or_else(|| WrapError::MissingMandatoryAttribute("format".into()))?,
        language: text("language"),
        keywords: attrs.keywords(),
        author: text("author"),
        description: text("description"),
        payload,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

/// Reports every violated structural invariant; empty report means valid.
pub fn validate(obj: &ComplexObject) -> ValidationReport {
    let mut violations = Vec::new();
    if obj.payload.class() != obj.class {
        violations.push(format!(
            "payload variant `{}` does not match class `{}`",
            obj.payload.class(),
            obj.class
        ));
    }
    if obj.keywords.iter().any(String::is_empty) {
        violations.push("keywords must not contain empty strings".into());
    }
    let mut positive = |field: &str, v: Option<u64>| {
        if v == Some(0) {
            violations.push(format!("{field} must be greater than zero when present"));
        }
    };
    match &obj.payload {
        SubdocumentPayload::Image {
            width_px,
            height_px,
            ..
        } => {
            positive("width_px", *width_px);
            positive("height_px", *height_px);
        }
        SubdocumentPayload::Video {
            width_px,
            height_px,
            ..
        } => {
            positive("width_px", *width_px);
            positive("height_px", *height_px);
        }
        SubdocumentPayload::RelationalView {
            column_names,
            column_types,
            ..
        } if column_names.len() != column_types.len() => {
            violations.push(format!(
                "column_names ({}) and column_types ({}) differ in length",
                column_names.len(),
                column_types.len()
            ));
        }
        _ => {}
    }
    ValidationReport { violations }
}
