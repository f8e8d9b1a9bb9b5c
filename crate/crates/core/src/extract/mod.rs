//! Source classification and attribute extraction.
//!
//! Attributes reach an [`AttributeSet`] on three paths, mirrored in
//! [`Provenance`]: standard means (file system metadata, extension tables),
//! ad-hoc algorithms (the per-format header parsers in the submodules), and
//! manual capture (manifest entries, which always win on conflict).

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{AttrValue, AttributeSet, Provenance, SubdocumentClass};

mod image;
mod relview;
mod sound;
mod text;

pub use image::extract_image_attrs;
pub use relview::extract_relational_view_attrs;
pub use sound::extract_sound_attrs;
pub use text::extract_text_attrs;

/// Diagnostics from the per-format header parsers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("unrecognized format: {0}")]
    UnrecognizedFormat(String),
    #[error("header truncated: need {needed} bytes, have {have}")]
    TruncatedHeader { needed: usize, have: usize },
    #[error("missing required chunk `{0}`")]
    MissingChunk(&'static str),
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRows {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("cannot read `{path}`: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("extraction failed for `{path}`: {source}")]
    ExtractorFailure {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("no class mapping for `{0}` and no override given")]
    UnknownClass(PathBuf),
}

/// One source to process: where it lives, an optional class override, and
/// manually captured attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class: Option<SubdocumentClass>,
    pub attributes: IndexMap<String, AttrValue>,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ManifestEntry {
            path: path.into(),
            class: None,
            attributes: IndexMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest `{path}`: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("manifest does not parse: {0}")]
    Invalid(String),
    #[error("duplicate path `{0}` in manifest")]
    DuplicatePath(PathBuf),
}

impl Manifest {
    /// Reads a TOML manifest: a list of `[[entry]]` tables with `path`,
    /// optional `class`, and an optional `[entry.attributes]` table of
    /// strings, non-negative integers, or string arrays (`keywords`).
    /// Relative entry paths are resolved against the manifest's directory.
    pub fn load(path: &Path) -> Result<Manifest, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManifestError::Unreadable {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Manifest::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Manifest, ManifestError> {
        #[derive(serde::Deserialize)]
        struct File {
            #[serde(default)]
            entry: Vec<Entry>,
        }
        #[derive(serde::Deserialize)]
        struct Entry {
            path: PathBuf,
            class: Option<String>,
            #[serde(default)]
            attributes: toml::Table,
        }

        let file: File = toml::from_str(text).map_err(|e| ManifestError::Invalid(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.entry.len());
        for raw in file.entry {
            let class = raw
                .class
                .as_deref()
                .map(str::parse)
                .transpose()
                .map_err(ManifestError::Invalid)?;
            let mut attributes = IndexMap::new();
            for (key, value) in raw.attributes {
                let value = match value {
                    toml::Value::String(s) => AttrValue::Text(s),
                    toml::Value::Integer(n) if n >= 0 => AttrValue::Int(n as u64),
                    toml::Value::Array(items) => {
                        let mut list = Vec::with_capacity(items.len());
                        for item in items {
                            match item {
                                toml::Value::String(s) => list.push(s),
                                other => {
                                    return Err(ManifestError::Invalid(format!(
                                        "attribute `{key}`: array items must be strings, got {other}"
                                    )))
                                }
                            }
                        }
                        AttrValue::List(list)
                    }
                    other => {
                        return Err(ManifestError::Invalid(format!(
                            "attribute `{key}`: expected string, non-negative integer or string array, got {other}"
                        )))
                    }
                };
                attributes.insert(key, value);
            }
            let path = if raw.path.is_absolute() {
                raw.path
            } else {
                base.join(&raw.path)
            };
            entries.push(ManifestEntry {
                path,
                class,
                attributes,
            });
        }
        let mut seen = std::collections::HashSet::new();
        for entry in &entries {
            if !seen.insert(&entry.path) {
                return Err(ManifestError::DuplicatePath(entry.path.clone()));
            }
        }
        Ok(Manifest { entries })
    }
}

/// Class of a source file: an explicit override wins, otherwise the file
/// extension decides.
pub fn classify_source(
    path: &Path,
    override_class: Option<SubdocumentClass>,
) -> Result<SubdocumentClass, ExtractError> {
    if let Some(class) = override_class {
        return Ok(class);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("txt" | "md" | "html") => Ok(SubdocumentClass::Text),
        Some("png" | "bmp" | "gif") => Ok(SubdocumentClass::Image),
        Some("wav") => Ok(SubdocumentClass::Sound),
        Some("avi" | "mp4") => Ok(SubdocumentClass::Video),
        Some("csv") => Ok(SubdocumentClass::RelationalView),
        _ => Err(ExtractError::UnknownClass(path.into())),
    }
}

fn mime_label(class: SubdocumentClass, path: &Path) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("txt") => "text/plain",
        Some("md") => "text/markdown",
        Some("html") => "text/html",
        Some("png") => "image/png",
        Some("bmp") => "image/bmp",
        Some("gif") => "image/gif",
        Some("wav") => "audio/wav",
        Some("avi") => "video/x-msvideo",
        Some("mp4") => "video/mp4",
        Some("csv") => "text/csv",
        _ => match class {
            SubdocumentClass::Text => "text/plain",
            SubdocumentClass::RelationalView => "text/csv",
            _ => "application/octet-stream",
        },
    }
}

fn iso8601(time: std::time::SystemTime) -> String {
    DateTime::<Utc>::from(time).to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Extracts the full attribute set for one manifest entry: general
/// attributes from the file system, class-specific ones from the matching
/// header parser, and the entry's manual attributes merged last (manual
/// wins). The source is only ever read, never touched.
pub fn extract(entry: &ManifestEntry) -> Result<AttributeSet, ExtractError> {
    let path = &entry.path;
    let unreadable = |e: std::io::Error| ExtractError::Unreadable {
        path: path.clone(),
        reason: e.to_string(),
    };
    let bytes = std::fs::read(path).map_err(unreadable)?;
    let class = classify_source(path, entry.class)?;

    let mut attrs = AttributeSet::new(class);
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    attrs.set("name", AttrValue::Text(file_name), Provenance::Standard);
    attrs.set(
        "source_uri",
        AttrValue::Text(path.to_string_lossy().into_owned()),
        Provenance::Standard,
    );
    attrs.set(
        "size_bytes",
        AttrValue::Int(bytes.len() as u64),
        Provenance::Standard,
    );
    attrs.set(
        "format",
        AttrValue::Text(mime_label(class, path).into()),
        Provenance::Standard,
    );
    if let Ok(meta) = std::fs::metadata(path) {
        if let Ok(modified) = meta.modified() {
            attrs.set(
                "modified",
                AttrValue::Text(iso8601(modified)),
                Provenance::Standard,
            );
        }
        if let Ok(created) = meta.created() {
            attrs.set(
                "created",
                AttrValue::Text(iso8601(created)),
                Provenance::Standard,
            );
        }
    }

    let fragment = match class {
        SubdocumentClass::Text => extract_text_attrs(&bytes),
        SubdocumentClass::Image => extract_image_attrs(&bytes),
        SubdocumentClass::Sound => extract_sound_attrs(&bytes),
        SubdocumentClass::RelationalView => extract_relational_view_attrs(&bytes),
        // no header parser exists for video containers; metadata arrives via
        // manual capture or not at all
        SubdocumentClass::Video => Ok(Vec::new()),
    };
    let fragment = fragment.map_err(|source| ExtractError::ExtractorFailure {
        path: path.clone(),
        source,
    })?;
    for attr in fragment {
        attrs.attributes.push(attr);
    }

    for (name, value) in &entry.attributes {
        if name == "keywords" {
            attrs.attributes.retain(|a| a.name != "keywords");
            match value {
                AttrValue::List(items) => {
                    for item in items {
                        attrs.add_keyword(item.clone(), Provenance::Manual);
                    }
                }
                AttrValue::Text(s) => attrs.add_keyword(s.clone(), Provenance::Manual),
                AttrValue::Int(n) => attrs.add_keyword(n.to_string(), Provenance::Manual),
            }
        } else {
            attrs.set(name, value.clone(), Provenance::Manual);
        }
    }
    Ok(attrs)
}
