//! `HMF1` binary heatmap files.
//!
//! Layout, all integers and reals little-endian:
//!
//! | offset | size        | field                                         |
//! |--------|-------------|-----------------------------------------------|
//! | 0      | 4           | magic `48 4D 46 31` ("HMF1")                  |
//! | 4      | 4           | u32 version (1)                               |
//! | 8      | 4           | u32 landmark count K                          |
//! | 12     | 4           | u32 height                                    |
//! | 16     | 4           | u32 width                                     |
//! | 20     | 1           | transform flag: 0 = identity, 1 = present     |
//! | 21     | 0 or 48     | 6 × f64 view transform `[a, b, tx, c, d, ty]` |
//! | ...    | 4·K·H·W     | f32 scores, landmark-major then row-major     |

use std::path::Path;

use super::FormatError;
use crate::heatmap::{AffineTransform2D, Heatmap, HeatmapStack};

pub const HEATMAP_MAGIC: [u8; 4] = *b"HMF1";
pub const HEATMAP_VERSION: u32 = 1;

const HEADER_LEN: usize = 21;
const TRANSFORM_LEN: usize = 48;

pub fn encode_heatmap_file(stack: &HeatmapStack) -> Vec<u8> {
    let (k, h, w) = stack.shape();
    let has_transform = !stack.view_transform.is_identity();
    let payload = 4 * k * h * w;
    let mut out = Vec::with_capacity(HEADER_LEN + TRANSFORM_LEN + payload);
    out.extend_from_slice(&HEATMAP_MAGIC);
    for v in [HEATMAP_VERSION, k as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(u8::from(has_transform));
    if has_transform {
        for v in stack.view_transform.m {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for hm in &stack.heatmaps {
        for v in hm.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

/// Decodes a complete file image. `expected_landmarks` enforces K.
pub fn decode_heatmap_file(bytes: &[u8], expected_landmarks: Option<u32>) -> Result<HeatmapStack, FormatError> {
    if bytes.len() < 4 || bytes[..4] != HEATMAP_MAGIC {
        return Err(FormatError::BadMagic(bytes[..bytes.len().min(4)].to_vec()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let version = u32_at(bytes, 4);
    if version != HEATMAP_VERSION {
        return Err(FormatError::UnsupportedVersion {
            what: "heatmap",
            found: u64::from(version),
        });
    }
    let (k, h, w) = (u32_at(bytes, 8), u32_at(bytes, 12), u32_at(bytes, 16));
    if let Some(expected) = expected_landmarks {
        if k != expected {
            return Err(FormatError::LandmarkCount { expected, got: k });
        }
    }
    if k == 0 || h == 0 || w == 0 {
        return Err(FormatError::Payload(format!("empty shape {k}x{h}x{w}")));
    }
    let flag = bytes[20];
    let transform_len = match flag {
        0 => 0,
        1 => TRANSFORM_LEN,
        other => return Err(FormatError::BadFlag(other)),
    };
    let cells = (k as usize)
        .checked_mul(h as usize)
        .and_then(|v| v.checked_mul(w as usize))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| FormatError::Payload(format!("shape {k}x{h}x{w} overflows")))?;
    let expected = HEADER_LEN + transform_len + cells;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes(bytes.len() - expected));
    }

    let view_transform = if transform_len > 0 {
        let mut m = [0.0; 6];
        for (i, slot) in m.iter_mut().enumerate() {
            let at = HEADER_LEN + 8 * i;
            *slot = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        }
        AffineTransform2D::new(m)
    } else {
        AffineTransform2D::IDENTITY
    };

    let (h, w) = (h as usize, w as usize);
    let data = &bytes[HEADER_LEN + transform_len..];
    let mut heatmaps = Vec::with_capacity(k as usize);
    for (idx, chunk) in data.chunks_exact(4 * h * w).enumerate() {
        let values: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FormatError::Payload(format!(
                "landmark {idx} has a non-finite score at ({}, {})",
                pos % w,
                pos / w
            )));
        }
        heatmaps.push(Heatmap::from_values(w, h, values).map_err(|e| FormatError::Payload(e.to_string()))?);
    }
    HeatmapStack::new(heatmaps, view_transform).map_err(|e| FormatError::Payload(e.to_string()))
}

pub fn read_heatmaps(path: impl AsRef<Path>, expected_landmarks: Option<u32>) -> Result<HeatmapStack, FormatError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_heatmap_file(&bytes, expected_landmarks)
}

pub fn write_heatmaps(path: impl AsRef<Path>, stack: &HeatmapStack) -> Result<(), FormatError> {
    let path = path.as_ref();
    std::fs::write(path, encode_heatmap_file(stack)).map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2x2, one landmark, no transform; scores 0.0, 1.0, 0.5, -2.0.
    const FIXTURE: [u8; 37] = [
        0x48, 0x4D, 0x46, 0x31, // "HMF1"
        0x01, 0x00, 0x00, 0x00, // version 1
        0x01, 0x00, 0x00, 0x00, // K = 1
        0x02, 0x00, 0x00, 0x00, // height 2
        0x02, 0x00, 0x00, 0x00, // width 2
        0x00, // identity transform
        0x00, 0x00, 0x00, 0x00, // (0,0)  0.0
        0x00, 0x00, 0x80, 0x3F, // (1,0)  1.0
        0x00, 0x00, 0x00, 0x3F, // (0,1)  0.5
        0x00, 0x00, 0x00, 0xC0, // (1,1) -2.0
    ];

    #[test]
    fn hex_fixture() {
        let stack = decode_heatmap_file(&FIXTURE, None).unwrap();
        assert_eq!(stack.shape(), (1, 2, 2));
        assert!(stack.view_transform.is_identity());
        let hm = &stack.heatmaps[0];
        assert_eq!(
            (hm.get(0, 0), hm.get(1, 0), hm.get(0, 1), hm.get(1, 1)),
            (0.0, 1.0, 0.5, -2.0)
        );
        assert_eq!(encode_heatmap_file(&stack), FIXTURE);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            decode_heatmap_file(b"HMF2rest", None),
            Err(FormatError::BadMagic(_))
        ));
        assert!(matches!(
            decode_heatmap_file(b"HM", None),
            Err(FormatError::BadMagic(_))
        ));
        let mut v2 = FIXTURE;
        v2[4] = 2;
        assert!(matches!(
            decode_heatmap_file(&v2, None),
            Err(FormatError::UnsupportedVersion { found: 2, .. })
        ));
        let mut flag = FIXTURE;
        flag[20] = 7;
        assert!(matches!(decode_heatmap_file(&flag, None), Err(FormatError::BadFlag(7))));
        assert!(matches!(
            decode_heatmap_file(&FIXTURE, Some(4)),
            Err(FormatError::LandmarkCount { expected: 4, got: 1 })
        ));
    }

    #[test]
    fn length_must_match() {
        assert!(matches!(
            decode_heatmap_file(&FIXTURE[..36], None),
            Err(FormatError::Truncated { expected: 37, got: 36 })
        ));
        assert!(matches!(
            decode_heatmap_file(&FIXTURE[..10], None),
            Err(FormatError::Truncated { .. })
        ));
        let mut long = FIXTURE.to_vec();
        long.push(0);
        assert!(matches!(
            decode_heatmap_file(&long, None),
            Err(FormatError::TrailingBytes(1))
        ));
    }

    #[test]
    fn transform_roundtrip() {
        let t = AffineTransform2D::new([1.01, 0.02, -3.5, -0.02, 0.99, 4.25]);
        let stack = HeatmapStack::new(vec![Heatmap::zeros(3, 2), Heatmap::zeros(3, 2)], t).unwrap();
        let bytes = encode_heatmap_file(&stack);
        assert_eq!(bytes.len(), 21 + 48 + 2 * 6 * 4);
        assert_eq!(bytes[20], 1);
        assert_eq!(decode_heatmap_file(&bytes, Some(2)).unwrap(), stack);
    }

    #[test]
    fn rejects_nan_payload() {
        let mut bad = FIXTURE;
        bad[33..37].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_heatmap_file(&bad, None), Err(FormatError::Payload(_))));
    }
}
