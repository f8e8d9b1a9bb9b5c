//! WAVE attributes from the RIFF chunk list: format fields from `fmt `,
//! duration derived from the `data` chunk's declared size. Sample data is
//! never read.

use crate::model::{AttrValue, Attribute, Provenance};

use super::FormatError;

/// `sample_rate_hz`, `channels`, and `duration_ms` for a RIFF/WAVE stream.
/// Duration is data-chunk bytes × 1000 / byte-rate, rounded to the nearest
/// millisecond (half away from zero), computed in integer arithmetic.
pub fn extract_sound_attrs(bytes: &[u8]) -> Result<Vec<Attribute>, FormatError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(FormatError::UnrecognizedFormat(
            "not a RIFF/WAVE stream".into(),
        ));
    }

    let mut fmt: Option<(u64, u64)> = None; // (channels, byte_rate) with sample rate below
    let mut sample_rate = 0u64;
    let mut data_len: Option<u64> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        match id {
            b"fmt " => {
                let needed = pos + 8 + 16;
                if bytes.len() < needed {
                    return Err(FormatError::TruncatedHeader {
                        needed,
                        have: bytes.len(),
                    });
                }
                let f = &bytes[pos + 8..];
                let channels = u16::from_le_bytes(f[2..4].try_into().unwrap()) as u64;
                sample_rate = u32::from_le_bytes(f[4..8].try_into().unwrap()) as u64;
                let byte_rate = u32::from_le_bytes(f[8..12].try_into().unwrap()) as u64;
                fmt = Some((channels, byte_rate));
            }
            b"data" => data_len = Some(size as u64),
            _ => {}
        }
        // chunks are word-aligned: odd sizes carry one pad byte
        pos += 8 + size + (size & 1);
    }

    let (channels, byte_rate) = fmt.ok_or(FormatError::MissingChunk("fmt"))?;
    let data_len = data_len.ok_or(FormatError::MissingChunk("data"))?;
    if byte_rate == 0 {
        return Err(FormatError::UnrecognizedFormat(
            "fmt chunk declares a zero byte rate".into(),
        ));
    }
    let duration_ms = (2 * data_len * 1000 + byte_rate) / (2 * byte_rate);

    let algo = |name: &str, value: AttrValue| Attribute {
        name: name.into(),
        value,
        provenance: Provenance::Algorithmic,
    };
    Ok(vec![
        algo("duration_ms", AttrValue::Int(duration_ms)),
        algo("sample_rate_hz", AttrValue::Int(sample_rate)),
        algo("channels", AttrValue::Int(channels)),
    ])
}
