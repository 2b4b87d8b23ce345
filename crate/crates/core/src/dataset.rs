//! Deterministic synthetic image sets: linear gradients, checkerboards and
//! Gaussian blobs with integer pixels in `[0, 255]`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::Rng;

use crate::image::{Image, PEAK_8BIT};
use crate::rng::{self, Domain, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Gradient,
    Checkerboard,
    Blob,
    /// Each image picks one of the other kinds at random.
    Mixed,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(SyntheticKind::Gradient),
            "checkerboard" => Ok(SyntheticKind::Checkerboard),
            "blob" => Ok(SyntheticKind::Blob),
            "mixed" => Ok(SyntheticKind::Mixed),
            other => Err(Error::Unknown {
                what: "synthetic kind",
                name: other.to_string(),
            }),
        }
    }
}

impl SyntheticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticKind::Gradient => "gradient",
            SyntheticKind::Checkerboard => "checkerboard",
            SyntheticKind::Blob => "blob",
            SyntheticKind::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: SyntheticKind,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seed: u64,
}

/// Image `i` is drawn from its own stream, so prefixes of a larger set
/// are identical to smaller sets with the same seed.
pub fn synthesize_dataset(spec: &DatasetSpec) -> Result<Vec<Image>> {
    if spec.height == 0 || spec.width == 0 || spec.channels == 0 {
        return Err(Error::invalid("image dimensions must be ≥ 1"));
    }
    Ok((0..spec.count)
        .map(|i| synthesize_one(spec, &mut rng::stream(spec.seed, Domain::Data, i as u64)))
        .collect())
}

fn synthesize_one(spec: &DatasetSpec, rng: &mut Stream) -> Image {
    let kind = match spec.kind {
        SyntheticKind::Mixed => [SyntheticKind::Gradient, SyntheticKind::Checkerboard, SyntheticKind::Blob]
            [rng.random_range(0..3)],
        k => k,
    };
    let (h, w, ch) = (spec.height, spec.width, spec.channels);
    let mut data = alloc::vec![0.0; h * w * ch];
    for c in 0..ch {
        let plane = match kind {
            SyntheticKind::Gradient => gradient(h, w, rng),
            SyntheticKind::Checkerboard => checkerboard(h, w, rng),
            _ => blobs(h, w, rng),
        };
        for (i, v) in plane.into_iter().enumerate() {
            data[i * ch + c] = libm::round(v).clamp(0.0, PEAK_8BIT);
        }
    }
    Image::new(h, w, ch, data).expect("shape is consistent by construction")
}

fn level(rng: &mut Stream) -> f64 {
    rng.random_range(0.0..=PEAK_8BIT)
}

fn gradient(h: usize, w: usize, rng: &mut Stream) -> Vec<f64> {
    let angle: f64 = rng.random_range(0.0..core::f64::consts::TAU);
    let (a, b) = (level(rng), level(rng));
    let (dx, dy) = (libm::cos(angle), libm::sin(angle));
    let proj = |y: usize, x: usize| x as f64 * dx + y as f64 * dy;
    let corners = [proj(0, 0), proj(0, w - 1), proj(h - 1, 0), proj(h - 1, w - 1)];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    (0..h * w)
        .map(|i| {
            let t = (proj(i / w, i % w) - lo) / span;
            a + (b - a) * t
        })
        .collect()
}

fn checkerboard(h: usize, w: usize, rng: &mut Stream) -> Vec<f64> {
    let max_cell = (h.min(w) / 2).max(1);
    let cell = rng.random_range(1..=max_cell);
    let (oy, ox) = (rng.random_range(0..cell), rng.random_range(0..cell));
    let (a, b) = (level(rng), level(rng));
    (0..h * w)
        .map(|i| {
            let (y, x) = (i / w + oy, i % w + ox);
            if (y / cell + x / cell) % 2 == 0 {
                a
            } else {
                b
            }
        })
        .collect()
}

fn blobs(h: usize, w: usize, rng: &mut Stream) -> Vec<f64> {
    let background = rng.random_range(0.0..96.0);
    let mut plane = alloc::vec![background; h * w];
    let count = rng.random_range(1..=3);
    let size = h.min(w) as f64;
    for _ in 0..count {
        let cy = rng.random_range(0.0..h as f64);
        let cx = rng.random_range(0.0..w as f64);
        let sigma = rng.random_range(size / 8.0..=size / 3.0).max(0.5);
        let amp = rng.random_range(64.0..=PEAK_8BIT);
        for (i, v) in plane.iter_mut().enumerate() {
            let (dy, dx) = ((i / w) as f64 - cy, (i % w) as f64 - cx);
            *v += amp * libm::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
        }
    }
    plane
}
