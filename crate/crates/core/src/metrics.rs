//! MSE, PSNR, and global-statistics SSIM / MS-SSIM.
//!
//! SSIM here is the single-window form computed over the whole plane:
//! a luminance factor from the means times a contrast factor built from
//! the standard deviations. MS-SSIM adds a covariance structure factor at
//! every scale. Multi-channel images are scored per channel and averaged.

use alloc::vec::Vec;

use crate::image::Image;
use crate::{Error, Result};

/// Default MS-SSIM exponents for five scales (finest first).
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const MS_SSIM_SCALES: usize = 5;

pub fn mse(x: &Image, x_hat: &Image) -> Result<f64> {
    x.check_same_shape(x_hat)?;
    let sum: f64 = x
        .data()
        .iter()
        .zip(x_hat.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// `10·log10(A²/MSE)`; identical images give `+∞`.
pub fn psnr(x: &Image, x_hat: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(x, x_hat)?, x.peak()))
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * libm::log10(peak * peak / mse)
    }
}

/// Stabilising constants `(v1, v2)` for peak `A`.
pub fn stabilizers(peak: f64) -> (f64, f64) {
    ((0.01 * peak) * (0.01 * peak), (0.03 * peak) * (0.03 * peak))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PlaneStats {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov: f64,
}

pub(crate) fn plane_stats(x: &[f64], y: &[f64]) -> PlaneStats {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mean_x, b - mean_y);
        var_x += da * da;
        var_y += db * db;
        cov += da * db;
    }
    PlaneStats {
        mean_x,
        mean_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov: cov / n,
    }
}

impl PlaneStats {
    pub fn luminance(&self, v1: f64) -> f64 {
        (2.0 * self.mean_x * self.mean_y + v1) / (self.mean_x * self.mean_x + self.mean_y * self.mean_y + v1)
    }

    pub fn contrast(&self, v2: f64) -> f64 {
        let (sx, sy) = (libm::sqrt(self.var_x), libm::sqrt(self.var_y));
        (2.0 * sx * sy + v2) / (self.var_x + self.var_y + v2)
    }

    pub fn structure(&self, v3: f64) -> f64 {
        let (sx, sy) = (libm::sqrt(self.var_x), libm::sqrt(self.var_y));
        (self.cov + v3) / (sx * sy + v3)
    }
}

/// Luminance × contrast, per channel, averaged.
pub fn ssim(x: &Image, x_hat: &Image) -> Result<f64> {
    x.check_same_shape(x_hat)?;
    let (v1, v2) = stabilizers(x.peak());
    let total: f64 = (0..x.channels())
        .map(|c| {
            let s = plane_stats(&x.plane(c), &x_hat.plane(c));
            s.luminance(v1) * s.contrast(v2)
        })
        .sum();
    Ok(total / x.channels() as f64)
}

/// Gradient of [`ssim`] with respect to `x_hat`, alongside its value.
pub fn ssim_with_grad(x: &Image, x_hat: &Image) -> Result<(f64, Vec<f64>)> {
    x.check_same_shape(x_hat)?;
    let (v1, v2) = stabilizers(x.peak());
    let channels = x.channels();
    let pixels = x.height() * x.width();
    let n = pixels as f64;
    let mut grad = alloc::vec![0.0; x.len()];
    let mut total = 0.0;
    for c in 0..channels {
        let xp = x.plane(c);
        let yp = x_hat.plane(c);
        let s = plane_stats(&xp, &yp);
        let (sx, sy) = (libm::sqrt(s.var_x), libm::sqrt(s.var_y));
        let l_num = 2.0 * s.mean_x * s.mean_y + v1;
        let l_den = s.mean_x * s.mean_x + s.mean_y * s.mean_y + v1;
        let c_num = 2.0 * sx * sy + v2;
        let c_den = s.var_x + s.var_y + v2;
        let (lum, con) = (l_num / l_den, c_num / c_den);
        total += lum * con;
        // d lum / d mean_y
        let dl = (2.0 * s.mean_x * l_den - l_num * 2.0 * s.mean_y) / (l_den * l_den);
        for (i, &yv) in yp.iter().enumerate() {
            let dy = yv - s.mean_y;
            // d sy/dy_i = dy/(n·sy); d var_y/dy_i = 2·dy/n
            let dsy = if sy > 0.0 { dy / (n * sy) } else { 0.0 };
            let dcon = (2.0 * sx * dsy * c_den - c_num * 2.0 * dy / n) / (c_den * c_den);
            grad[i * channels + c] = (dl / n * con + lum * dcon) / channels as f64;
        }
    }
    Ok((total / channels as f64, grad))
}

/// 2×2 mean pooling with stride 2; odd trailing rows/columns are dropped.
fn downsample(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (h2, w2) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(h2 * w2);
    for y in 0..h2 {
        for x in 0..w2 {
            let at = |yy: usize, xx: usize| plane[yy * w + xx];
            out.push((at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1)) / 4.0);
        }
    }
    (out, h2, w2)
}

/// Exponents for `scales` levels: the five-scale defaults, truncated and
/// renormalised to sum to one when fewer scales are requested.
pub fn ms_ssim_weights(scales: usize) -> Result<Vec<f64>> {
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() {
        return Err(Error::invalid(alloc::format!(
            "MS-SSIM supports 1..={} scales, got {scales}",
            MS_SSIM_WEIGHTS.len()
        )));
    }
    let head = &MS_SSIM_WEIGHTS[..scales];
    let sum: f64 = head.iter().sum();
    Ok(head.iter().map(|w| w / sum).collect())
}

pub fn ms_ssim_applicable(height: usize, width: usize, scales: usize) -> bool {
    scales >= 1 && scales <= MS_SSIM_WEIGHTS.len() && height.min(width) >= 1 << (scales - 1)
}

/// `l_M^{α_M} · Π_j a_j^{β_j} · b_j^{γ_j}` with `α = β = γ`.
///
/// Factors are clamped at zero before exponentiation so anti-correlated
/// inputs score 0 rather than NaN.
pub fn ms_ssim(x: &Image, x_hat: &Image, scales: usize) -> Result<f64> {
    x.check_same_shape(x_hat)?;
    let weights = ms_ssim_weights(scales)?;
    if !ms_ssim_applicable(x.height(), x.width(), scales) {
        return Err(Error::invalid(alloc::format!(
            "image {}×{} too small for {scales} MS-SSIM scales",
            x.height(),
            x.width()
        )));
    }
    let (v1, v2) = stabilizers(x.peak());
    let v3 = v2 / 2.0;
    let mut total = 0.0;
    for c in 0..x.channels() {
        let (mut xp, mut yp) = (x.plane(c), x_hat.plane(c));
        let (mut h, mut w) = (x.height(), x.width());
        let mut score = 1.0;
        for (j, &weight) in weights.iter().enumerate() {
            let s = plane_stats(&xp, &yp);
            score *= libm::pow(s.contrast(v2).max(0.0), weight);
            score *= libm::pow(s.structure(v3).max(0.0), weight);
            if j + 1 == scales {
                score *= libm::pow(s.luminance(v1).max(0.0), weight);
            } else {
                let (nx, nh, nw) = downsample(&xp, h, w);
                yp = downsample(&yp, h, w).0;
                xp = nx;
                h = nh;
                w = nw;
            }
        }
        total += score;
    }
    Ok(total / x.channels() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_image(h: usize, w: usize, c: usize, seed: u64) -> Image {
        let mut rng = rng::stream(seed, Domain::Data, 0);
        Image::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(0.0..255.0)).collect()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let x = random_image(5, 7, 3, 1);
        assert_eq!(mse(&x, &x).unwrap(), 0.0);
        let black = Image::filled(3, 4, 2, 0.0).unwrap();
        let white = Image::filled(3, 4, 2, 255.0).unwrap();
        assert_eq!(mse(&black, &white).unwrap(), 65025.0);
        assert!(mse(&black, &Image::filled(4, 3, 2, 0.0).unwrap()).is_err());
    }

    #[test]
    fn mse_matches_scalar_loop() {
        let x = random_image(6, 5, 3, 2);
        let y = random_image(6, 5, 3, 3);
        let mut acc = 0.0;
        for r in 0..6 {
            for col in 0..5 {
                for ch in 0..3 {
                    let d = x.get(r, col, ch) - y.get(r, col, ch);
                    acc += d * d;
                }
            }
        }
        let oracle = acc / 90.0;
        assert!((mse(&x, &y).unwrap() - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn psnr_examples() {
        assert_eq!(psnr_from_mse(255.0 * 255.0, 255.0), 0.0);
        assert!((psnr_from_mse(65.025, 255.0) - 30.0).abs() < 1e-12);
        let x = random_image(4, 4, 1, 4);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let x = random_image(8, 8, 3, 5);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let black = Image::filled(4, 4, 1, 0.0).unwrap();
        let white = Image::filled(4, 4, 1, 255.0).unwrap();
        let expected = 6.5025 / (65025.0 + 6.5025);
        assert!((ssim(&black, &white).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn ssim_constant_shift() {
        let x = random_image(8, 8, 1, 6);
        let c = 17.0;
        let shifted = Image::new(8, 8, 1, x.data().iter().map(|v| v + c).collect()).unwrap();
        let mu = x.data().iter().sum::<f64>() / 64.0;
        let v1 = 6.5025;
        let expected = (2.0 * mu * (mu + c) + v1) / (mu * mu + (mu + c) * (mu + c) + v1);
        assert!((ssim(&x, &shifted).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        let x = random_image(4, 4, 2, 7);
        let y = random_image(4, 4, 2, 8);
        let (value, grad) = ssim_with_grad(&x, &y).unwrap();
        assert!((value - ssim(&x, &y).unwrap()).abs() < 1e-15);
        let h = 1e-4;
        for i in 0..y.len() {
            let mut plus = y.clone();
            plus.data_mut()[i] += h;
            let mut minus = y.clone();
            minus.data_mut()[i] -= h;
            let fd = (ssim(&x, &plus).unwrap() - ssim(&x, &minus).unwrap()) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-7 + 1e-4 * fd.abs(), "i={i} fd={fd} g={}", grad[i]);
        }
    }

    #[test]
    fn ms_ssim_identity() {
        let x = random_image(64, 64, 3, 9);
        assert!((ms_ssim(&x, &x, 5).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ms_ssim_single_scale_components() {
        let x = random_image(8, 8, 1, 10);
        let y = random_image(8, 8, 1, 11);
        let (v1, v2) = stabilizers(255.0);
        let s = plane_stats(&x.plane(0), &y.plane(0));
        let expected = s.luminance(v1) * s.contrast(v2) * s.structure(v2 / 2.0).max(0.0);
        assert!((ms_ssim(&x, &y, 1).unwrap() - expected).abs() < 1e-12);
        // contrast × luminance is exactly the single-scale SSIM
        assert!((ssim(&x, &y).unwrap() - s.luminance(v1) * s.contrast(v2)).abs() < 1e-15);
    }

    #[test]
    fn ms_ssim_constant_images() {
        let x = Image::filled(32, 32, 1, 40.0).unwrap();
        let y = Image::filled(32, 32, 1, 90.0).unwrap();
        let (v1, _) = stabilizers(255.0);
        let l = (2.0 * 40.0 * 90.0 + v1) / (40.0f64 * 40.0 + 90.0 * 90.0 + v1);
        let w = ms_ssim_weights(5).unwrap()[4];
        assert!((ms_ssim(&x, &y, 5).unwrap() - l.powf(w)).abs() < 1e-12);
    }

    #[test]
    fn ms_ssim_size_check() {
        let x = random_image(8, 32, 1, 12);
        assert!(ms_ssim(&x, &x, 5).is_err());
        assert!(ms_ssim(&x, &x, 4).is_ok());
        assert!(ms_ssim(&x, &x, 6).is_err());
    }

    #[test]
    fn weights_sum_to_one() {
        for m in 1..=5 {
            let w = ms_ssim_weights(m).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(ms_ssim_weights(5).unwrap()[0], 0.0448 / MS_SSIM_WEIGHTS.iter().sum::<f64>());
    }

    proptest! {
        #[test]
        fn symmetric_and_permutation_invariant(seed: u64, rot in 0usize..64) {
            let x = random_image(8, 8, 1, seed);
            let y = random_image(8, 8, 1, seed ^ 0xff);
            prop_assert_eq!(mse(&x, &y).unwrap(), mse(&y, &x).unwrap());
            prop_assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-15);
            let perm = |im: &Image| {
                let mut d = im.data().to_vec();
                d.rotate_left(rot);
                Image::new(8, 8, 1, d).unwrap()
            };
            prop_assert!((ssim(&perm(&x), &perm(&y)).unwrap() - ssim(&x, &y).unwrap()).abs() < 1e-12);
            prop_assert!((mse(&perm(&x), &perm(&y)).unwrap() - mse(&x, &y).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn psnr_decreasing(a in 1e-3f64..1e5, b in 1e-3f64..1e5) {
            prop_assume!(a < b);
            prop_assert!(psnr_from_mse(a, 255.0) > psnr_from_mse(b, 255.0));
        }

        #[test]
        fn ms_ssim_self_is_one(seed: u64) {
            let x = random_image(16, 16, 2, seed);
            prop_assert!((ms_ssim(&x, &x, 5).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((1.0 - ssim(&x, &x).unwrap()).abs() < 1e-12);
        }
    }
}
