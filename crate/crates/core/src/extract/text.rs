//! Plain-text attributes: byte-level counts only, no language guessing.

use crate::model::{AttrValue, Attribute, Provenance};

use super::FormatError;

/// Word and line counts plus the encoding label. A word is a maximal run of
/// non-whitespace; a line is a newline-terminated segment, plus one final
/// unterminated segment if the text does not end in a newline.
pub fn extract_text_attrs(bytes: &[u8]) -> Result<Vec<Attribute>, FormatError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| FormatError::UnrecognizedFormat("not valid UTF-8 text".into()))?;
    let word_count = text.split_whitespace().count() as u64;
    let mut line_count = text.matches('\n').count() as u64;
    if !text.is_empty() && !text.ends_with('\n') {
        line_count += 1;
    }
    let algo = |name: &str, value: AttrValue| Attribute {
        name: name.into(),
        value,
        provenance: Provenance::Algorithmic,
    };
    Ok(vec![
        algo("encoding", AttrValue::Text("utf-8".into())),
        algo("word_count", AttrValue::Int(word_count)),
        algo("line_count", AttrValue::Int(line_count)),
    ])
}
