//! Image attributes read from the first few header bytes — dimensions and
//! bit depth sit in fixed positions for all three supported formats, so no
//! pixel data is ever decoded.

use crate::model::{AttrValue, Attribute, Provenance};

use super::FormatError;

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Parses PNG (IHDR), BMP (BITMAPINFOHEADER) or GIF (logical screen
/// descriptor) headers into `width_px`, `height_px`, `bit_depth`, and
/// `image_format`.
pub fn extract_image_attrs(bytes: &[u8]) -> Result<Vec<Attribute>, FormatError> {
    let (w, h, depth, format) = if bytes.starts_with(&PNG_MAGIC) {
        png(bytes)?
    } else if bytes.starts_with(b"BM") {
        bmp(bytes)?
    } else if bytes.starts_with(b"GIF87a") || bytes.starts_with(b"GIF89a") {
        gif(bytes)?
    } else {
        return Err(FormatError::UnrecognizedFormat(
            "unknown image signature".into(),
        ));
    };
    let algo = |name: &str, value: AttrValue| Attribute {
        name: name.into(),
        value,
        provenance: Provenance::Algorithmic,
    };
    Ok(vec![
        algo("width_px", AttrValue::Int(w)),
        algo("height_px", AttrValue::Int(h)),
        algo("bit_depth", AttrValue::Int(depth)),
        algo("image_format", AttrValue::Text(format.into())),
    ])
}

fn need(bytes: &[u8], needed: usize) -> Result<(), FormatError> {
    if bytes.len() < needed {
        Err(FormatError::TruncatedHeader {
            needed,
            have: bytes.len(),
        })
    } else {
        Ok(())
    }
}

fn png(bytes: &[u8]) -> Result<(u64, u64, u64, &'static str), FormatError> {
    // signature, chunk length, "IHDR", width, height, bit depth
    need(bytes, 25)?;
    if &bytes[12..16] != b"IHDR" {
        return Err(FormatError::UnrecognizedFormat(
            "PNG without leading IHDR".into(),
        ));
    }
    let w = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
    let h = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
    Ok((w as u64, h as u64, bytes[24] as u64, "png"))
}

fn bmp(bytes: &[u8]) -> Result<(u64, u64, u64, &'static str), FormatError> {
    // file header (14) + info header through biBitCount
    need(bytes, 30)?;
    let header_size = u32::from_le_bytes(bytes[14..18].try_into().unwrap());
    if header_size < 40 {
        return Err(FormatError::UnrecognizedFormat(format!(
            "BMP with pre-BITMAPINFOHEADER header size {header_size}"
        )));
    }
    let w = i32::from_le_bytes(bytes[18..22].try_into().unwrap());
    // negative height means a top-down row order, not a negative size
    let h = i32::from_le_bytes(bytes[22..26].try_into().unwrap()).unsigned_abs();
    let depth = u16::from_le_bytes(bytes[28..30].try_into().unwrap());
    if w <= 0 {
        return Err(FormatError::UnrecognizedFormat(format!("BMP width {w}")));
    }
    Ok((w as u64, h as u64, depth as u64, "bmp"))
}

fn gif(bytes: &[u8]) -> Result<(u64, u64, u64, &'static str), FormatError> {
    // signature + logical screen descriptor through the packed fields byte
    need(bytes, 11)?;
    let w = u16::from_le_bytes(bytes[6..8].try_into().unwrap());
    let h = u16::from_le_bytes(bytes[8..10].try_into().unwrap());
    let colour_resolution = ((bytes[10] >> 4) & 0x07) as u64 + 1;
    Ok((w as u64, h as u64, colour_resolution, "gif"))
}
