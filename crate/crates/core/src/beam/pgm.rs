//! Binary portable graymaps (P5): 16-bit big-endian intensities and 8-bit
//! kinoforms.

use std::io::{self, Write};

use super::mraf::Kinoform;
use super::BeamError;

/// Intensity image scaled so its maximum maps to 65535.
pub fn write_intensity(image: &[f64], width: usize, height: usize, out: &mut impl Write) -> Result<(), BeamError> {
    if image.len() != width * height {
        return Err(BeamError::GridMismatch {
            expected: width * height,
            found: image.len(),
        });
    }
    let peak = image.iter().cloned().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in image {
        bytes.extend_from_slice(&((v.max(0.0) * scale).round() as u16).to_be_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn write_kinoform(kinoform: &Kinoform, out: &mut impl Write) -> Result<(), BeamError> {
    write!(out, "P5\n{} {}\n255\n", kinoform.width, kinoform.height)?;
    out.write_all(&kinoform.levels)?;
    Ok(())
}

/// Graymap samples with their maximum value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub samples: Vec<u16>,
}

fn bad(msg: &str) -> BeamError {
    BeamError::Io(io::Error::new(io::ErrorKind::InvalidData, msg.to_string()))
}

pub fn read_graymap(bytes: &[u8]) -> Result<Graymap, BeamError> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    if fields[0] != "P5" {
        return Err(bad("not a binary graymap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, max_value) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if max_value == 0 || max_value > 65535 {
        return Err(bad("max value out of range"));
    }
    let data = &bytes[pos + 1..];
    let wide = max_value > 255;
    let need = width * height * if wide { 2 } else { 1 };
    if data.len() != need {
        return Err(bad("sample count does not match header"));
    }
    let samples = if wide {
        data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        data.iter().map(|&b| b as u16).collect()
    };
    Ok(Graymap {
        width,
        height,
        max_value: max_value as u16,
        samples,
    })
}

pub fn read_kinoform(bytes: &[u8]) -> Result<Kinoform, BeamError> {
    let g = read_graymap(bytes)?;
    if g.max_value != 255 {
        return Err(bad("kinoforms use 8-bit samples"));
    }
    Ok(Kinoform {
        width: g.width,
        height: g.height,
        levels: g.samples.into_iter().map(|s| s as u8).collect(),
    })
}
