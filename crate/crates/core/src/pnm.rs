//! NetPBM grayscale/RGB reader (P2, P3, P5, P6) and binary writer (P5, P6).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    AsciiGray,
    AsciiRgb,
    BinaryGray,
    BinaryRgb,
}

impl Format {
    fn channels(self) -> usize {
        match self {
            Format::AsciiGray | Format::BinaryGray => 1,
            Format::AsciiRgb | Format::BinaryRgb => 3,
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

/// Decode an in-memory NetPBM file, dividing samples by the file's maxval.
pub fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing 'P' magic".into()));
    }
    let format = match bytes[1] {
        b'2' => Format::AsciiGray,
        b'3' => Format::AsciiRgb,
        b'5' => Format::BinaryGray,
        b'6' => Format::BinaryRgb,
        other => {
            return Err(Error::MalformedHeader(format!(
                "unsupported magic P{}",
                other as char
            )))
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.next_uint("width")? as usize;
    let height = cur.next_uint("height")? as usize;
    let maxval = cur.next_uint("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero dimension".into()));
    }
    let channels = format.channels();
    let expected = width * height * channels;
    let scale = maxval as f64;

    let mut data = Vec::with_capacity(expected);
    match format {
        Format::AsciiGray | Format::AsciiRgb => {
            for _ in 0..expected {
                cur.skip_whitespace_and_comments();
                if cur.pos >= bytes.len() {
                    return Err(Error::TruncatedPayload {
                        expected,
                        found: data.len(),
                    });
                }
                let v = cur.next_uint("sample")?;
                if v > maxval {
                    return Err(Error::MalformedHeader(format!(
                        "sample {v} exceeds maxval {maxval}"
                    )));
                }
                data.push(v as f64 / scale);
            }
        }
        Format::BinaryGray | Format::BinaryRgb => {
            // exactly one whitespace byte separates the header from the raster
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(Error::MalformedHeader("missing raster separator".into()));
            }
            let raster = &bytes[cur.pos + 1..];
            let wide = maxval > 255;
            let sample_bytes = if wide { 2 } else { 1 };
            let found = raster.len() / sample_bytes;
            if found < expected {
                return Err(Error::TruncatedPayload { expected, found });
            }
            for i in 0..expected {
                let v = if wide {
                    u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as u32
                } else {
                    raster[i] as u32
                };
                data.push(v.min(maxval) as f64 / scale);
            }
        }
    }
    Image::new(height, width, channels, data)
}

/// Encode as binary P5/P6 with maxval 255. Samples are clamped to `[0, 1]`.
pub fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(img))?;
    Ok(())
}
