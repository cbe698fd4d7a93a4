//! Binary greyscale PGM (`P5`) frames.

use std::path::Path;

use fmd_core::BeamImage;

use crate::error::{io_err, CliError, Result};

struct Header {
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8], path: &str) -> Result<Header> {
    let fail = |offset: usize, message: &str| CliError::Pgm {
        path: path.to_string(),
        offset,
        message: message.to_string(),
    };
    if bytes.len() < 2 {
        return Err(fail(bytes.len(), "file ends before the magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(fail(0, "magic is not P5"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(fail(pos, "header truncated")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(fail(pos, "expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| fail(start, "number out of range"))?;
        if *field == 0 {
            return Err(fail(start, ["width", "height", "maxval"][i]));
        }
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fail(pos, "expected one whitespace byte before the raster")),
    }
    if fields[2] > 65535 {
        return Err(fail(pos, "maxval above 65535"));
    }
    Ok(Header {
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_start: pos,
    })
}

/// Decodes a `P5` image and scales it to unit maximum.
pub fn decode_pgm(bytes: &[u8], path: &str) -> Result<BeamImage> {
    let h = parse_header(bytes, path)?;
    let depth = if h.maxval > 255 { 2 } else { 1 };
    let need = h
        .width
        .checked_mul(h.height)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| CliError::Pgm {
            path: path.to_string(),
            offset: h.data_start,
            message: "dimensions overflow".into(),
        })?;
    let raster = &bytes[h.data_start..];
    if raster.len() < need {
        return Err(CliError::Pgm {
            path: path.to_string(),
            offset: bytes.len(),
            message: format!("raster truncated, expected {need} bytes after offset {}", h.data_start),
        });
    }
    let data = if depth == 1 {
        raster[..need].iter().map(|&b| b as f64).collect()
    } else {
        raster[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    let img = BeamImage::new(h.height, h.width, data)?;
    if img.max() <= 0.0 {
        return Err(fmd_core::Error::EmptyFrame.into());
    }
    Ok(img.normalized())
}

pub fn read_pgm(path: &Path) -> Result<BeamImage> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_pgm(&bytes, &path.display().to_string())
}

/// 8-bit encoding of the max-normalized image.
pub fn encode_pgm(image: &BeamImage) -> Vec<u8> {
    let max = image.max();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|v| (v * scale).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm(path: &Path, image: &BeamImage) -> Result<()> {
    std::fs::write(path, encode_pgm(image)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_with_comment() {
        let mut bytes = b"P5 # camera\n3 2\n255\n".to_vec();
        bytes.extend([0, 51, 255, 102, 0, 0]);
        let img = decode_pgm(&bytes, "t").unwrap();
        assert_eq!((img.height(), img.width()), (2, 3));
        assert_eq!(img.get(0, 1), 0.2);
        assert_eq!(img.get(1, 0), 0.4);
    }

    #[test]
    fn sixteen_bit_raster() {
        let mut bytes = b"P5 2 1 1000\n".to_vec();
        bytes.extend([0x01, 0xF4, 0x03, 0xE8]);
        let img = decode_pgm(&bytes, "t").unwrap();
        assert_eq!(img.data(), &[0.5, 1.0]);
    }

    #[test]
    fn truncation_names_offset() {
        let mut bytes = b"P5 128 128 255\n".to_vec();
        bytes.extend(vec![1u8; 100]);
        let err = decode_pgm(&bytes, "f.pgm").unwrap_err();
        match &err {
            CliError::Pgm { offset, .. } => assert_eq!(*offset, 115),
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("byte 115"));
        assert!(matches!(decode_pgm(b"P5 12", "f"), Err(CliError::Pgm { offset: 5, .. })));
        assert!(matches!(decode_pgm(b"P2 1 1 255\n0", "f"), Err(CliError::Pgm { offset: 0, .. })));
    }

    #[test]
    fn round_trip_within_quantization() {
        let data: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.37).sin().abs()).collect();
        let img = BeamImage::square(8, data).unwrap().normalized();
        let back = decode_pgm(&encode_pgm(&img), "t").unwrap();
        assert!(img.data().iter().zip(back.data()).all(|(a, b)| (a - b).abs() <= 1.0 / 255.0));
    }
}
