use alloc::vec::Vec;

use crate::{Error, Result};

/// Peak value of 8-bit pixels.
pub const PEAK_8BIT: f64 = 255.0;

/// H×W×C pixel array, interleaved (`data[(y·W + x)·C + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
    peak: f64,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_peak(height, width, channels, data, PEAK_8BIT)
    }

    pub fn with_peak(height: usize, width: usize, channels: usize, data: Vec<f64>, peak: f64) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("image dimensions must be ≥ 1"));
        }
        crate::error::check_len("image data", height * width * channels, data.len())?;
        if !(peak > 0.0) {
            return Err(Error::invalid("peak must be positive"));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
            peak,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, alloc::vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// One channel as a row-major H×W plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn clamped(mut self) -> Self {
        let peak = self.peak;
        self.data.iter_mut().for_each(|v| *v = v.clamp(0.0, peak));
        self
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(alloc::format!(
                "image shapes differ: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}
