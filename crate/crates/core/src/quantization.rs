//! Uniform centroids on `Z_p`, hard/soft quantization and soft
//! dequantization.

use alloc::vec::Vec;

use crate::error::check_finite;
use crate::{Error, Result};

/// Starting value of the quantizer hardness.
pub const SIGMA_Q_INIT: f64 = 5.0;
/// Saturation value of the annealed hardness.
pub const SIGMA_Q_MAX: f64 = 200.0;
/// Default number of quantization levels.
pub const DEFAULT_LEVELS: usize = 16;

/// `⌊i·p/N⌋` for `i = 0..N`.
pub fn build_centroids(p: u32, levels: usize) -> Result<Vec<u32>> {
    if levels < 2 || levels as u64 > p as u64 {
        return Err(Error::invalid(alloc::format!(
            "need 2 ≤ N ≤ p, got N = {levels}, p = {p}"
        )));
    }
    Ok((0..levels as u64)
        .map(|i| (i * p as u64 / levels as u64) as u32)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    p: u32,
    centroids: Vec<u32>,
    /// Hardness of the soft assignment; owned by whoever anneals it.
    pub sigma_q: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedLatent {
    pub values: Vec<u32>,
    pub indices: Vec<usize>,
}

impl Quantizer {
    pub fn uniform(p: u32, levels: usize) -> Result<Self> {
        Ok(Quantizer {
            p,
            centroids: build_centroids(p, levels)?,
            sigma_q: SIGMA_Q_INIT,
        })
    }

    /// Arbitrary strictly increasing centroids in `[0, p)`; a single
    /// centroid is allowed.
    pub fn with_centroids(p: u32, centroids: Vec<u32>) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::invalid("at least one centroid required"));
        }
        if centroids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("centroids must be strictly increasing"));
        }
        if let Some(&c) = centroids.iter().find(|&&c| c >= p) {
            return Err(Error::OutOfRange {
                what: "centroid",
                value: c as i64,
                bound: p as i64,
            });
        }
        Ok(Quantizer {
            p,
            centroids,
            sigma_q: SIGMA_Q_INIT,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn levels(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[u32] {
        &self.centroids
    }

    /// Nearest centroid index; exact ties go to the lower index.
    pub fn nearest(&self, z: f64) -> usize {
        let cs = &self.centroids;
        let upper = cs.partition_point(|&c| (c as f64) < z);
        if upper == 0 {
            return 0;
        }
        if upper == cs.len() {
            return cs.len() - 1;
        }
        let below = z - cs[upper - 1] as f64;
        let above = cs[upper] as f64 - z;
        if above < below {
            upper
        } else {
            upper - 1
        }
    }

    pub fn hard_quantize(&self, z: &[f64]) -> Result<QuantizedLatent> {
        check_finite("latent", z)?;
        let indices: Vec<usize> = z.iter().map(|&v| self.nearest(v)).collect();
        let values = indices.iter().map(|&i| self.centroids[i]).collect();
        Ok(QuantizedLatent { values, indices })
    }

    pub fn soft_quantize(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.soft_quantize_with_grad(z)?.0)
    }

    /// Soft quantization and its (diagonal) Jacobian `∂z̃_i/∂z_i`.
    ///
    /// With weights `w = softmax(−σ_q·(z − q)²)` the derivative is
    /// `2·σ_q·Var_w(q)`.
    pub fn soft_quantize_with_grad(&self, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_finite("latent", z)?;
        if !(self.sigma_q > 0.0) {
            return Err(Error::invalid("sigma_q must be positive"));
        }
        let mut values = Vec::with_capacity(z.len());
        let mut grads = Vec::with_capacity(z.len());
        for &zi in z {
            let (mean, var) = weighted_centroid_moments(&self.centroids, zi, self.sigma_q);
            values.push(mean);
            grads.push(2.0 * self.sigma_q * var);
        }
        Ok((values, grads))
    }

    /// Softmax-of-negative-squared-distance average of the centroids with
    /// unit sharpness.
    pub fn soft_dequantize(&self, z_prime: &[f64]) -> Result<Vec<f64>> {
        check_finite("noisy plaintext", z_prime)?;
        Ok(z_prime
            .iter()
            .map(|&v| weighted_centroid_moments(&self.centroids, v, 1.0).0)
            .collect())
    }
}

/// Mean and variance of the centroids under `softmax(−sharpness·(z − q)²)`.
fn weighted_centroid_moments(centroids: &[u32], z: f64, sharpness: f64) -> (f64, f64) {
    let logit = |q: u32| {
        let d = z - q as f64;
        -sharpness * d * d
    };
    let max = centroids.iter().map(|&q| logit(q)).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for &q in centroids {
        let w = libm::exp(logit(q) - max);
        let q = q as f64;
        total += w;
        first += w * q;
        second += w * q * q;
    }
    let mean = first / total;
    let var = (second / total - mean * mean).max(0.0);
    (mean, var)
}

/// `min(200, σ_prev + 5·⌊step/2000⌋)`.
pub fn anneal_sigma_q(step: u64, sigma_prev: f64) -> f64 {
    let bump = 5.0 * (step / 2000) as f64;
    (sigma_prev + bump).min(SIGMA_Q_MAX)
}
