//! Square-QAM constellation over `Z_p`, AWGN channel and likelihood-weighted
//! soft demodulation back to a real-valued ciphertext estimate.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::lattice::NoisyCiphertext;
use crate::rng::Stream;
use crate::{Error, Result};

/// Largest supported alphabet (64×64 QAM).
pub const MAX_POINTS: usize = 4096;
/// Default softmax weight on the likelihoods.
pub const DEFAULT_SIGMA_L: f64 = 5.0;

/// Ordered constellation: integer value `j` is sent as `points[j]`.
///
/// Points come from the smallest square grid with power-of-two side that
/// holds `p` points, levels `±1, ±3, …` on each axis, labelled row-major
/// (row = quadrature level, ascending; column = in-phase level, ascending).
/// The trailing `side² − p` labels are dropped and the remainder is scaled
/// to the requested average power.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    side: usize,
    /// Distance from the origin to the first grid level.
    scale: f64,
    avg_power: f64,
}

impl Constellation {
    pub fn new(p: u32, target_power: f64) -> Result<Self> {
        let p = p as usize;
        if p > MAX_POINTS {
            return Err(Error::invalid(alloc::format!(
                "constellation supports at most {MAX_POINTS} points, got {p}"
            )));
        }
        if p < 2 {
            return Err(Error::invalid("constellation needs at least 2 points"));
        }
        if !(target_power > 0.0 && target_power.is_finite()) {
            return Err(Error::invalid("target power must be positive"));
        }
        let mut side = 1;
        while side * side < p {
            side *= 2;
        }
        let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
        let raw: Vec<Complex64> = (0..p)
            .map(|j| Complex64::new(level(j % side), level(j / side)))
            .collect();
        let raw_power = raw.iter().map(|c| c.norm_sqr()).sum::<f64>() / p as f64;
        let scale = libm::sqrt(target_power / raw_power);
        Ok(Constellation {
            points: raw.into_iter().map(|c| c * scale).collect(),
            side,
            scale,
            avg_power: target_power,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn avg_power(&self) -> f64 {
        self.avg_power
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// In-phase (or quadrature) coordinate of grid column (or row) `i`.
    fn axis_level(&self, i: usize) -> f64 {
        ((2 * i) as f64 - (self.side - 1) as f64) * self.scale
    }

    pub fn modulate(&self, values: &[u32]) -> Result<Vec<Complex64>> {
        values
            .iter()
            .map(|&v| {
                self.points.get(v as usize).copied().ok_or(Error::OutOfRange {
                    what: "ciphertext symbol",
                    value: v as i64,
                    bound: self.points.len() as i64,
                })
            })
            .collect()
    }

    /// Minimum-distance decision.
    pub fn nearest(&self, y: Complex64) -> u32 {
        let axis = |v: f64| {
            let i = libm::round((v / self.scale + (self.side - 1) as f64) / 2.0);
            i.clamp(0.0, (self.side - 1) as f64) as usize
        };
        let j = axis(y.im) * self.side + axis(y.re);
        if j < self.points.len() {
            return j as u32;
        }
        // The grid cell belongs to a dropped label.
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.points.iter().enumerate() {
            let d = (y - c).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best as u32
    }

    pub fn hard_demodulate(&self, y_hat: &[Complex64]) -> Vec<u32> {
        y_hat.iter().map(|&y| self.nearest(y)).collect()
    }
}

/// AWGN with `σ² = P̄·10^(−SNR/10)`; infinite SNR means no noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub snr_db: f64,
    pub sigma2: f64,
}

impl ChannelModel {
    pub fn new(snr_db: f64, avg_power: f64) -> Self {
        let sigma2 = if snr_db == f64::INFINITY {
            0.0
        } else {
            avg_power * libm::pow(10.0, -snr_db / 10.0)
        };
        ChannelModel { snr_db, sigma2 }
    }

    pub fn noiseless() -> Self {
        ChannelModel {
            snr_db: f64::INFINITY,
            sigma2: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma2 == 0.0
    }

    /// `ŷ = y + n`, `n ~ CN(0, σ²)`: each real component has variance σ²/2.
    pub fn transmit(&self, y: &[Complex64], rng: &mut Stream) -> Vec<Complex64> {
        if self.is_noiseless() {
            return y.to_vec();
        }
        let std = libm::sqrt(self.sigma2 / 2.0);
        y.iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                s + Complex64::new(re * std, im * std)
            })
            .collect()
    }
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("noise variance must be positive"))
    }
}

/// `P(ŷ | c_j) = exp(−|ŷ − c_j|²/σ²) / (π·σ²)` for every point.
pub fn likelihoods(y_hat: Complex64, cons: &Constellation, sigma2: f64) -> Result<Vec<f64>> {
    check_sigma2(sigma2)?;
    let norm = 1.0 / (core::f64::consts::PI * sigma2);
    Ok(cons
        .points
        .iter()
        .map(|c| norm * libm::exp(-(y_hat - c).norm_sqr() / sigma2))
        .collect())
}

/// `Σ_j softmax(σ_l·row)_j · j` with max-subtraction.
pub fn softmax_reconstruct(row: &[f64], sigma_l: f64) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (j, &l) in row.iter().enumerate() {
        let w = libm::exp(sigma_l * (l - max));
        total += w;
        weighted += w * j as f64;
    }
    weighted / total
}

/// Per-symbol likelihood rows folded into `ĉ_i = Σ_j softmax(σ_l·l_i^j)·j`.
pub fn soft_demodulate(
    y_hat: &[Complex64],
    cons: &Constellation,
    sigma2: f64,
    sigma_l: f64,
) -> Result<NoisyCiphertext> {
    check_sigma2(sigma2)?;
    if !(sigma_l > 0.0 && sigma_l.is_finite()) {
        return Err(Error::invalid("sigma_l must be positive"));
    }
    if y_hat.iter().any(|y| !(y.re.is_finite() && y.im.is_finite())) {
        return Err(Error::NonFinite("channel output"));
    }
    let side = cons.side;
    let norm = 1.0 / (core::f64::consts::PI * sigma2);
    let mut g_re = alloc::vec![0.0; side];
    let mut g_im = alloc::vec![0.0; side];
    let mut row = alloc::vec![0.0; cons.len()];
    let c_hat = y_hat
        .iter()
        .map(|y| {
            // The Gaussian factorises over the two axes.
            for i in 0..side {
                let level = cons.axis_level(i);
                let dr = y.re - level;
                let di = y.im - level;
                g_re[i] = libm::exp(-dr * dr / sigma2);
                g_im[i] = libm::exp(-di * di / sigma2);
            }
            for (j, l) in row.iter_mut().enumerate() {
                *l = norm * g_re[j % side] * g_im[j / side];
            }
            softmax_reconstruct(&row, sigma_l)
        })
        .collect();
    Ok(NoisyCiphertext { c_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use proptest::prelude::*;
    use rand::Rng;

    fn mean_power(pts: &[Complex64]) -> f64 {
        pts.iter().map(|c| c.norm_sqr()).sum::<f64>() / pts.len() as f64
    }

    #[test]
    fn unit_power_full_grid() {
        let c = Constellation::new(4096, 1.0).unwrap();
        assert_eq!(c.len(), 4096);
        assert!((mean_power(c.points()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_alphabet_drops_three_labels() {
        let full = Constellation::new(4096, 1.0).unwrap();
        let c = Constellation::new(4093, 1.0).unwrap();
        assert_eq!(c.len(), 4093);
        assert_eq!(c.side(), 64);
        assert!((mean_power(c.points()) - 1.0).abs() < 1e-9);
        // Same geometry up to scale; the last three grid cells are gone.
        let ratio = c.points()[0].re / full.points()[0].re;
        for (a, b) in c.points().iter().zip(full.points()) {
            assert!((a - b * ratio).norm() < 1e-12);
        }
    }

    #[test]
    fn four_points_is_qpsk() {
        let c = Constellation::new(4, 1.0).unwrap();
        let a = core::f64::consts::FRAC_1_SQRT_2;
        let expected = [
            Complex64::new(-a, -a),
            Complex64::new(a, -a),
            Complex64::new(-a, a),
            Complex64::new(a, a),
        ];
        for (p, e) in c.points().iter().zip(expected) {
            assert!((p - e).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_oversized_alphabet() {
        assert!(Constellation::new(4097, 1.0).is_err());
        assert!(Constellation::new(16, 0.0).is_err());
    }

    #[test]
    fn modulate_indexing() {
        let c = Constellation::new(4093, 2.0).unwrap();
        assert_eq!(c.modulate(&[0]).unwrap()[0], c.points()[0]);
        assert!(c.modulate(&[4093]).is_err());
    }

    #[test]
    fn nearest_matches_brute_force() {
        let c = Constellation::new(4093, 1.0).unwrap();
        let mut rng = rng::stream(3, Domain::Channel, 0);
        for _ in 0..2000 {
            let y = Complex64::new(rng.random_range(-1.6..1.6), rng.random_range(-1.6..1.6));
            let brute = c
                .points()
                .iter()
                .enumerate()
                .min_by(|a, b| (y - a.1).norm_sqr().total_cmp(&(y - b.1).norm_sqr()))
                .unwrap()
                .0;
            let fast = c.nearest(y) as usize;
            assert!(((y - c.points()[fast]).norm_sqr() - (y - c.points()[brute]).norm_sqr()).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_channel_is_identity() {
        let y = [Complex64::new(0.1, -0.2), Complex64::new(1.0, 0.0)];
        let ch = ChannelModel::new(f64::INFINITY, 1.0);
        assert_eq!(ch.transmit(&y, &mut rng::stream(0, Domain::Channel, 0)), y);
    }

    #[test]
    fn sigma2_from_snr() {
        assert!((ChannelModel::new(10.0, 1.0).sigma2 - 0.1).abs() < 1e-15);
        assert!((ChannelModel::new(0.0, 2.0).sigma2 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn likelihood_properties() {
        let c = Constellation::new(16, 1.0).unwrap();
        let row = likelihoods(c.points()[5], &c, 0.1).unwrap();
        let argmax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax, 5);
        // Midpoint of two neighbours.
        let mid = (c.points()[0] + c.points()[1]) / 2.0;
        let row = likelihoods(mid, &c, 0.3).unwrap();
        assert!((row[0] - row[1]).abs() <= 1e-15 * row[0]);
        assert!(likelihoods(mid, &c, 0.0).is_err());
    }

    #[test]
    fn likelihood_ratio_closed_form() {
        let c = Constellation::new(64, 1.0).unwrap();
        let mut rng = rng::stream(4, Domain::Channel, 1);
        for _ in 0..100 {
            let y = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let s2 = rng.random_range(0.05..1.0);
            let (a, b) = (rng.random_range(0..64usize), rng.random_range(0..64usize));
            let row = likelihoods(y, &c, s2).unwrap();
            let da = (y - c.points()[a]).norm_sqr();
            let db = (y - c.points()[b]).norm_sqr();
            let expected = ((db - da) / s2).exp();
            assert!((row[a] / row[b] - expected).abs() <= 1e-9 * expected);
        }
    }

    #[test]
    fn saturated_softmax_recovers_symbol() {
        let c = Constellation::new(4093, 1.0).unwrap();
        let sent = [0u32, 1, 64, 2046, 4092];
        let y = c.modulate(&sent).unwrap();
        let out = soft_demodulate(&y, &c, 1e-6, DEFAULT_SIGMA_L).unwrap();
        for (a, &b) in out.c_hat.iter().zip(&sent) {
            assert!((a - b as f64).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_row_gives_midpoint() {
        assert!((softmax_reconstruct(&[0.7; 4093], 5.0) - 2046.0).abs() < 1e-9);
    }

    #[test]
    fn soft_demod_matches_direct_likelihoods() {
        let c = Constellation::new(64, 1.0).unwrap();
        let y = [Complex64::new(0.13, -0.4), Complex64::new(-0.9, 0.77)];
        let out = soft_demodulate(&y, &c, 0.05, 5.0).unwrap();
        for (yi, ci) in y.iter().zip(&out.c_hat) {
            let direct = softmax_reconstruct(&likelihoods(*yi, &c, 0.05).unwrap(), 5.0);
            assert!((direct - ci).abs() < 1e-9);
        }
        assert!(soft_demodulate(&y, &c, -1.0, 5.0).is_err());
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(row in proptest::collection::vec(0f64..10.0, 2..50), shift in -100f64..100.0) {
            let shifted: Vec<f64> = row.iter().map(|l| l - shift).collect();
            prop_assert!((softmax_reconstruct(&row, 5.0) - softmax_reconstruct(&shifted, 5.0)).abs() < 1e-12 * row.len() as f64);
        }

        #[test]
        fn soft_demod_in_range(re in -3f64..3.0, im in -3f64..3.0, s2 in 1e-4f64..5.0) {
            let c = Constellation::new(4093, 1.0).unwrap();
            let out = soft_demodulate(&[Complex64::new(re, im)], &c, s2, 5.0).unwrap();
            prop_assert!((0.0..=4092.0).contains(&out.c_hat[0]));
        }
    }
}
