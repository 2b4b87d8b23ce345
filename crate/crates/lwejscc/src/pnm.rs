//! Netpbm grayscale (PGM) and color (PPM) images, ASCII and binary.
//!
//! Samples are read as-is; the image peak is the file's maxval. Writing
//! rounds and clamps to 8-bit binary files.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use lwejscc_core::Image;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        ensure!(self.pos > start, "unexpected end of PNM data");
        Ok(std::str::from_utf8(&self.bytes[start..self.pos])?)
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse().with_context(|| format!("bad PNM number `{t}`"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.token()?.to_owned();
    let (channels, binary) = match magic.as_str() {
        "P2" => (1, false),
        "P5" => (1, true),
        "P3" => (3, false),
        "P6" => (3, true),
        other => bail!("unsupported PNM magic `{other}`"),
    };
    let width = r.number()?;
    let height = r.number()?;
    let maxval = r.number()?;
    ensure!((1..=65535).contains(&maxval), "PNM maxval {maxval} out of range");
    let count = width * height * channels;
    let mut data = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        r.pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = bytes.get(r.pos..r.pos + need).context("truncated PNM raster")?;
        if wide {
            data.extend(raster.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64));
        } else {
            data.extend(raster.iter().map(|&b| b as f64));
        }
    } else {
        for _ in 0..count {
            data.push(r.number()? as f64);
        }
    }
    ensure!(data.iter().all(|&v| v <= maxval as f64), "PNM sample exceeds maxval");
    Ok(Image::with_peak(height, width, channels, data, maxval as f64)?)
}

/// Binary PGM for one channel, PPM for three.
pub fn encode(img: &Image) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => bail!("cannot write a {c}-channel image as PNM"),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let scale = 255.0 / img.peak();
    out.extend(img.data().iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub fn read(path: &Path) -> Result<Image> {
    decode(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)
        .with_context(|| format!("decoding {}", path.display()))
}

pub fn write(img: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode(img)?).with_context(|| format!("writing {}", path.display()))
}
