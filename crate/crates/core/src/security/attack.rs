//! Chosen-plaintext attack: Eve knows the encoder, the public key and the
//! image distribution, collects `(x, c)` pairs and fits a decoder `c → x`.

use alloc::vec::Vec;

use num_complex::Complex64;

use super::learn::{MlpRegressor, MlpSettings, Ridge};
use crate::codec::Codec;
use crate::image::Image;
use crate::lattice::{self, centered, derive_errors, PublicKey};
use crate::metrics;
use crate::modem::{ChannelModel, Constellation};
use crate::quantization::Quantizer;
use crate::rng::{self, Domain, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdversaryModel {
    MeanPredictor,
    Linear,
    Mlp,
}

impl core::str::FromStr for AdversaryModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_predictor" => Ok(AdversaryModel::MeanPredictor),
            "linear" => Ok(AdversaryModel::Linear),
            "mlp" => Ok(AdversaryModel::Mlp),
            other => Err(Error::Unknown {
                what: "adversary model",
                name: alloc::string::ToString::to_string(other),
            }),
        }
    }
}

impl AdversaryModel {
    pub fn as_str(self) -> &'static str {
        match self {
            AdversaryModel::MeanPredictor => "mean_predictor",
            AdversaryModel::Linear => "linear",
            AdversaryModel::Mlp => "mlp",
        }
    }
}

/// Criterion used to select the linear model's regularisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMetric {
    Mse,
    Psnr,
    Ssim,
}

impl core::str::FromStr for AttackMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(AttackMetric::Mse),
            "psnr" => Ok(AttackMetric::Psnr),
            "ssim" => Ok(AttackMetric::Ssim),
            other => Err(Error::Unknown {
                what: "attack metric",
                name: alloc::string::ToString::to_string(other),
            }),
        }
    }
}

/// How the sender picks error triples for the attacked messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorPolicy {
    FreshPerMessage,
    /// Sabotage: every message reuses the errors of message 0, so
    /// `c_0 − c_1 = z̄_0 − z̄_1`.
    Reused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub model: AdversaryModel,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub epochs: usize,
    pub metric: AttackMetric,
    pub error_policy: ErrorPolicy,
    /// Eve's channel SNR in dB; `None` is a noiseless tap on `c`.
    pub snr_e_db: Option<f64>,
    /// Constellation power for finite-SNR observation.
    pub power: f64,
    pub hidden: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(model: AdversaryModel, train_pairs: usize, test_pairs: usize) -> Self {
        AttackConfig {
            model,
            train_pairs,
            test_pairs,
            epochs: 60,
            metric: AttackMetric::Mse,
            error_policy: ErrorPolicy::FreshPerMessage,
            snr_e_db: None,
            power: 1.0,
            hidden: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub model: AdversaryModel,
    pub error_policy: ErrorPolicy,
    pub snr_e_db: Option<f64>,
    pub train_pairs: usize,
    pub test_pairs: usize,
    /// Mean per-image test MSE of the adversary.
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// Same metrics for `x̂ = E[x]` over the training images.
    pub baseline_mse: f64,
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
}

impl AttackReport {
    /// Adversary MSE over baseline MSE; ≈ 1 means nothing was learned.
    pub fn mse_ratio(&self) -> f64 {
        self.mse / self.baseline_mse
    }
}

/// `ȳ = y + n̄` at Eve's SNR; infinite SNR returns `y`.
pub fn eve_channel_observe(y: &[Complex64], snr_e_db: f64, avg_power: f64, rng: &mut Stream) -> Vec<Complex64> {
    ChannelModel::new(snr_e_db, avg_power).transmit(y, rng)
}

/// Runs the attack on `images[..train]` (training) and
/// `images[train..train+test]` (evaluation).
///
/// Only the public key is passed in: the adversary has no path to `S` or
/// the key seed. `error_seed` is used by the simulated sender.
pub fn run_cpa_attack(
    cfg: &AttackConfig,
    codec: &Codec,
    quantizer: &Quantizer,
    public: &PublicKey,
    error_seed: u64,
    images: &[Image],
) -> Result<AttackReport> {
    if cfg.train_pairs == 0 || cfg.test_pairs == 0 {
        return Err(Error::invalid("attack needs at least one training and one test pair"));
    }
    let total = cfg.train_pairs + cfg.test_pairs;
    if images.len() < total {
        return Err(Error::invalid(alloc::format!(
            "attack needs {total} images, got {}",
            images.len()
        )));
    }
    let params = &public.params;
    let p = params.p;
    let constellation = match cfg.snr_e_db {
        Some(_) => Some(Constellation::new(p, cfg.power)?),
        None => None,
    };
    let reused = derive_errors(error_seed, 0, params);
    let mut observed = Vec::with_capacity(total);
    for (i, x) in images[..total].iter().enumerate() {
        let z_bar = quantizer.hard_quantize(&codec.encode(x)?)?.values;
        let ct = match cfg.error_policy {
            ErrorPolicy::FreshPerMessage => lattice::encrypt(&z_bar, public, &derive_errors(error_seed, i as u64, params))?,
            ErrorPolicy::Reused => lattice::encrypt(&z_bar, public, &reused)?,
        };
        let c = match (cfg.snr_e_db, &constellation) {
            (Some(snr), Some(cons)) => {
                let y = cons.modulate(&ct.c)?;
                let mut noise = rng::stream(cfg.seed, Domain::EveChannel, i as u64);
                cons.hard_demodulate(&eve_channel_observe(&y, snr, cons.avg_power(), &mut noise))
            }
            _ => ct.c,
        };
        observed.push(c);
    }

    let (train_c, test_c) = observed.split_at(cfg.train_pairs);
    let (train_x, test_x) = images[..total].split_at(cfg.train_pairs);
    let centre = circular_means(train_c, p);
    let feats = |cs: &[Vec<u32>]| cs.iter().map(|c| features(c, &centre, p)).collect::<Vec<_>>();
    let (train_f, test_f) = (feats(train_c), feats(test_c));
    let train_y: Vec<Vec<f64>> = train_x.iter().map(|x| x.data().to_vec()).collect();

    let mean_image = column_means(&train_y);
    let predictions: Vec<Vec<f64>> = match cfg.model {
        AdversaryModel::MeanPredictor => alloc::vec![mean_image.clone(); test_f.len()],
        AdversaryModel::Linear => {
            let lambda = select_ridge(&train_f, &train_y, train_x, cfg.metric)?;
            let model = Ridge::fit(&train_f, &train_y, lambda)?;
            test_f.iter().map(|f| model.predict(f)).collect()
        }
        AdversaryModel::Mlp => {
            let settings = MlpSettings {
                hidden: cfg.hidden,
                epochs: cfg.epochs,
                batch: 32,
                learning_rate: cfg.learning_rate,
                patience: 8,
            };
            let mut r = rng::stream(cfg.seed, Domain::Adversary, 0);
            let model = MlpRegressor::fit(&train_f, &train_y, &settings, &mut r)?;
            test_f.iter().map(|f| model.predict(f)).collect()
        }
    };
    let (mse, psnr, ssim) = score(test_x, &predictions)?;
    let (baseline_mse, baseline_psnr, baseline_ssim) = score(test_x, &alloc::vec![mean_image; test_x.len()])?;
    Ok(AttackReport {
        model: cfg.model,
        error_policy: cfg.error_policy,
        snr_e_db: cfg.snr_e_db,
        train_pairs: cfg.train_pairs,
        test_pairs: cfg.test_pairs,
        mse,
        psnr,
        ssim,
        baseline_mse,
        baseline_psnr,
        baseline_ssim,
    })
}

/// Per-coordinate circular mean of the residues, in `[0, p)`.
fn circular_means(cs: &[Vec<u32>], p: u32) -> Vec<f64> {
    let k = cs.first().map_or(0, |c| c.len());
    let w = core::f64::consts::TAU / p as f64;
    (0..k)
        .map(|i| {
            let (mut s, mut c) = (0.0, 0.0);
            for row in cs {
                let a = row[i] as f64 * w;
                s += libm::sin(a);
                c += libm::cos(a);
            }
            let angle = libm::atan2(s, c);
            let angle = if angle < 0.0 { angle + core::f64::consts::TAU } else { angle };
            angle / w
        })
        .collect()
}

/// Per coordinate: the residue centered about its circular mean, and the
/// residue's position on the unit circle.
fn features(c: &[u32], centre: &[f64], p: u32) -> Vec<f64> {
    let pf = p as f64;
    let w = core::f64::consts::TAU / pf;
    let mut f = Vec::with_capacity(3 * c.len());
    for (&v, &m) in c.iter().zip(centre) {
        f.push(centered(v as i64 - libm::round(m) as i64, p) as f64 / pf);
        f.push(libm::cos(v as f64 * w));
        f.push(libm::sin(v as f64 * w));
    }
    f
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut m = alloc::vec![0.0; rows.first().map_or(0, |r| r.len())];
    for r in rows {
        m.iter_mut().zip(r).for_each(|(a, v)| *a += v / n);
    }
    m
}

/// Mean MSE, mean PSNR and mean SSIM of clamped predictions.
fn score(truth: &[Image], predictions: &[Vec<f64>]) -> Result<(f64, f64, f64)> {
    let n = truth.len() as f64;
    let (mut mse, mut psnr, mut ssim) = (0.0, 0.0, 0.0);
    for (x, pred) in truth.iter().zip(predictions) {
        let x_hat = Image::with_peak(x.height(), x.width(), x.channels(), pred.clone(), x.peak())?.clamped();
        let m = metrics::mse(x, &x_hat)?;
        mse += m / n;
        psnr += metrics::psnr_from_mse(m, x.peak()) / n;
        ssim += metrics::ssim(x, &x_hat)? / n;
    }
    Ok((mse, psnr, ssim))
}

/// Picks the ridge strength on the last fifth of the training pairs.
fn select_ridge(f: &[Vec<f64>], y: &[Vec<f64>], images: &[Image], metric: AttackMetric) -> Result<f64> {
    const GRID: [f64; 7] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0];
    let hold = f.len() / 5;
    if hold == 0 {
        return Ok(1.0);
    }
    let cut = f.len() - hold;
    let mut best = (f64::INFINITY, 1.0);
    for &lambda in &GRID {
        let model = Ridge::fit(&f[..cut], &y[..cut], lambda)?;
        let preds: Vec<Vec<f64>> = f[cut..].iter().map(|r| model.predict(r)).collect();
        let (mse, psnr, ssim) = score(&images[cut..], &preds)?;
        let loss = match metric {
            AttackMetric::Mse => mse,
            AttackMetric::Psnr => -psnr,
            AttackMetric::Ssim => -ssim,
        };
        if loss < best.0 {
            best = (loss, lambda);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecSpec;
    use crate::dataset::{synthesize_dataset, DatasetSpec, SyntheticKind};
    use crate::lattice::{keygen, LweParams};

    fn setup(count: usize) -> (Codec, Quantizer, crate::KeyPair, Vec<Image>) {
        let params = LweParams::new(4093, 32, 32, 8.87, 16).unwrap();
        let keys = keygen(&params, 1, 2).unwrap();
        let codec = Codec::new(CodecSpec::identity(4, 4, 1, 4093), 0).unwrap();
        let images = synthesize_dataset(&DatasetSpec {
            kind: SyntheticKind::Blob,
            count,
            height: 4,
            width: 4,
            channels: 1,
            seed: 5,
        })
        .unwrap();
        (codec, Quantizer::uniform(4093, 16).unwrap(), keys, images)
    }

    #[test]
    fn mean_predictor_is_the_baseline() {
        let (codec, q, keys, images) = setup(300);
        let cfg = AttackConfig::new(AdversaryModel::MeanPredictor, 200, 100);
        let r = run_cpa_attack(&cfg, &codec, &q, &keys.public, 9, &images).unwrap();
        assert_eq!(r.mse, r.baseline_mse);
        assert_eq!(r.mse_ratio(), 1.0);
    }

    #[test]
    fn reused_errors_leak_and_fresh_errors_do_not() {
        let (codec, q, keys, images) = setup(1500);
        let mut cfg = AttackConfig::new(AdversaryModel::Linear, 1000, 500);
        let fresh = run_cpa_attack(&cfg, &codec, &q, &keys.public, 9, &images).unwrap();
        cfg.error_policy = ErrorPolicy::Reused;
        let reused = run_cpa_attack(&cfg, &codec, &q, &keys.public, 9, &images).unwrap();
        assert!(fresh.mse_ratio() > 0.95, "{fresh:?}");
        assert!(reused.mse_ratio() < 0.5, "{reused:?}");
    }

    #[test]
    fn too_few_images() {
        let (codec, q, keys, images) = setup(10);
        let cfg = AttackConfig::new(AdversaryModel::Linear, 8, 8);
        assert!(run_cpa_attack(&cfg, &codec, &q, &keys.public, 9, &images).is_err());
    }

    #[test]
    fn eve_channel_infinite_snr_is_transparent() {
        let y = [Complex64::new(0.3, -0.2), Complex64::new(-1.0, 0.5)];
        let mut r = rng::stream(0, Domain::EveChannel, 0);
        assert_eq!(eve_channel_observe(&y, f64::INFINITY, 1.0, &mut r), y);
    }
}
