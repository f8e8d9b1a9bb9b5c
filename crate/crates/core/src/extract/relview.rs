//! Relational-view attributes from a CSV export: header names, per-column
//! type inference, and the data row count.

use crate::model::{AttrValue, Attribute, Provenance};

use super::FormatError;

/// Narrowest type that fits every non-empty cell of a column. Ordered:
/// integer ⊂ real ⊂ text, so a column with no non-empty cells is `integer`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ColType {
    Integer,
    Real,
    Text,
}

impl ColType {
    fn label(self) -> &'static str {
        match self {
            ColType::Integer => "integer",
            ColType::Real => "real",
            ColType::Text => "text",
        }
    }

    fn of_cell(cell: &str) -> ColType {
        if cell.parse::<i64>().is_ok() {
            ColType::Integer
        } else if is_real(cell) {
            ColType::Real
        } else {
            ColType::Text
        }
    }
}

/// Decimal or scientific notation: optional sign, digits with an optional
/// point (or a leading point), optional exponent. No inf/nan/hex.
fn is_real(s: &str) -> bool {
    let s = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, Some(e)),
        None => (s, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            (!int.is_empty() || !frac.is_empty())
                && int.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => !mantissa.is_empty() && mantissa.bytes().all(|b| b.is_ascii_digit()),
    };
    let exponent_ok = exponent.is_none_or(|e| {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        !e.is_empty() && e.bytes().all(|b| b.is_ascii_digit())
    });
    mantissa_ok && exponent_ok
}

/// Reads a comma-separated, double-quote-escaped table with a mandatory
/// header row; yields `column_names`, `column_types`, and `row_count`.
pub fn extract_relational_view_attrs(bytes: &[u8]) -> Result<Vec<Attribute>, FormatError> {
    if bytes.is_empty() {
        return Err(FormatError::EmptyInput);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(bytes);
    let column_names: Vec<String> = reader
        .headers()
        .map_err(|e| FormatError::UnrecognizedFormat(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();

    let mut types = vec![ColType::Integer; column_names.len()];
    let mut row_count = 0u64;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths {
                len, expected_len, ..
            } => FormatError::RaggedRows {
                row: idx + 1,
                found: *len as usize,
                expected: *expected_len as usize,
            },
            _ => FormatError::UnrecognizedFormat(e.to_string()),
        })?;
        row_count += 1;
        for (ty, cell) in types.iter_mut().zip(record.iter()) {
            if !cell.is_empty() {
                *ty = (*ty).max(ColType::of_cell(cell));
            }
        }
    }

    let algo = |name: &str, value: AttrValue| Attribute {
        name: name.into(),
        value,
        provenance: Provenance::Algorithmic,
    };
    Ok(vec![
        algo("column_names", AttrValue::List(column_names)),
        algo(
            "column_types",
            AttrValue::List(types.into_iter().map(|t| t.label().to_string()).collect()),
        ),
        algo("row_count", AttrValue::Int(row_count)),
    ])
}
