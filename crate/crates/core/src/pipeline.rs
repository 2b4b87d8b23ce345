//! End-to-end link: quantize → encrypt → modulate → AWGN → soft demodulate
//! → decrypt → dequantize, plus per-image transmission and SNR sweeps.

use alloc::vec::Vec;

use crate::codec::Codec;
use crate::image::Image;
use crate::lattice::{self, centered, centered_real, derive_errors, Ciphertext, ErrorTriple, KeyPair};
use crate::metrics;
use crate::modem::{self, ChannelModel, Constellation};
use crate::quantization::{QuantizedLatent, Quantizer};
use crate::rng::{self, Domain};
use crate::stats;
use crate::Result;

/// Scales used for MS-SSIM in records; images smaller than `2^(M−1)` get
/// no MS-SSIM value.
pub const RECORD_MS_SSIM_SCALES: usize = metrics::MS_SSIM_SCALES;

/// Everything between the encoder output and the decoder input.
#[derive(Debug, Clone)]
pub struct Link {
    pub keys: KeyPair,
    pub quantizer: Quantizer,
    pub constellation: Constellation,
    pub channel: ChannelModel,
    pub sigma_l: f64,
    /// Seed shared by sender and receiver for the per-message errors.
    pub error_seed: u64,
    pub channel_seed: u64,
    /// Test hook: encrypt with all-zero errors.
    pub zero_crypto_errors: bool,
}

/// Intermediate values of one message through the link.
#[derive(Debug, Clone)]
pub struct LinkTrace {
    pub quantized: QuantizedLatent,
    pub ciphertext: Ciphertext,
    pub c_hat: Vec<f64>,
    /// `z′`, the noisy decrypted plaintext.
    pub z_prime: Vec<f64>,
    /// `ẑ`, the dequantized latent.
    pub z_hat: Vec<f64>,
    /// `decrypt(c) − z̄`, centered.
    pub crypto_residual: Vec<f64>,
    /// `ĉ − c`, centered.
    pub channel_residual: Vec<f64>,
    /// `z′ − z̄`, centered.
    pub compound_residual: Vec<f64>,
}

impl Link {
    /// Builds a link with a constellation normalised to `power` and a
    /// channel at `snr_db`.
    pub fn new(
        keys: KeyPair,
        levels: usize,
        power: f64,
        snr_db: f64,
        sigma_l: f64,
        error_seed: u64,
        channel_seed: u64,
    ) -> Result<Self> {
        let p = keys.params().p;
        let constellation = Constellation::new(p, power)?;
        let channel = ChannelModel::new(snr_db, constellation.avg_power());
        Ok(Link {
            quantizer: Quantizer::uniform(p, levels)?,
            keys,
            constellation,
            channel,
            sigma_l,
            error_seed,
            channel_seed,
            zero_crypto_errors: false,
        })
    }

    pub fn with_snr(&self, snr_db: f64) -> Self {
        Link {
            channel: ChannelModel::new(snr_db, self.constellation.avg_power()),
            ..self.clone()
        }
    }

    pub fn errors(&self, message_index: u64) -> ErrorTriple {
        let params = self.keys.params();
        if self.zero_crypto_errors {
            ErrorTriple {
                message_index,
                ..ErrorTriple::zeros(params)
            }
        } else {
            derive_errors(self.error_seed, message_index, params)
        }
    }

    /// Carries latent `z` across the link as message `message_index`.
    pub fn transport(&self, z: &[f64], message_index: u64) -> Result<LinkTrace> {
        let p = self.keys.params().p;
        let quantized = self.quantizer.hard_quantize(z).map_err(|e| e.at("quantize"))?;
        let errors = self.errors(message_index);
        let ciphertext =
            lattice::encrypt(&quantized.values, &self.keys.public, &errors).map_err(|e| e.at("encrypt"))?;
        let c_hat = if self.channel.is_noiseless() {
            ciphertext.c.iter().map(|&v| v as f64).collect()
        } else {
            let y = self.constellation.modulate(&ciphertext.c).map_err(|e| e.at("modulate"))?;
            let mut stream = rng::stream(self.channel_seed, Domain::Channel, message_index);
            let y_hat = self.channel.transmit(&y, &mut stream);
            modem::soft_demodulate(&y_hat, &self.constellation, self.channel.sigma2, self.sigma_l)
                .map_err(|e| e.at("demodulate"))?
                .c_hat
        };
        let nct = lattice::NoisyCiphertext { c_hat };
        let z_prime = lattice::decrypt_noisy(&nct, &ciphertext.d, &self.keys).map_err(|e| e.at("decrypt"))?;
        let z_hat = self.quantizer.soft_dequantize(&z_prime).map_err(|e| e.at("dequantize"))?;

        let clean = lattice::decrypt(&ciphertext, &self.keys).map_err(|e| e.at("decrypt"))?;
        let crypto_residual = clean
            .iter()
            .zip(&quantized.values)
            .map(|(&a, &b)| centered(a as i64 - b as i64, p) as f64)
            .collect();
        let channel_residual = nct
            .c_hat
            .iter()
            .zip(&ciphertext.c)
            .map(|(&a, &b)| centered_real(a - b as f64, p))
            .collect();
        let compound_residual = z_prime
            .iter()
            .zip(&quantized.values)
            .map(|(&a, &b)| centered_real(a - b as f64, p))
            .collect();
        Ok(LinkTrace {
            quantized,
            ciphertext,
            c_hat: nct.c_hat,
            z_prime,
            z_hat,
            crypto_residual,
            channel_residual,
            compound_residual,
        })
    }
}

/// One row per (image, SNR) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionRecord {
    pub image: usize,
    pub snr_db: f64,
    pub rho: f64,
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub ms_ssim: Option<f64>,
    pub crypto_std: f64,
    pub channel_std: f64,
    pub compound_std: f64,
}

/// Per-SNR mean and standard deviation over the images of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub snr_db: f64,
    pub rho: f64,
    pub count: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
    pub ms_ssim_mean: Option<f64>,
    pub crypto_std: f64,
    pub channel_std: f64,
    pub compound_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<TransmissionRecord>,
    pub aggregates: Vec<SweepAggregate>,
}

/// Sends one image and scores the reconstruction.
pub fn transmit(
    x: &Image,
    codec: &Codec,
    link: &Link,
    image: usize,
    message_index: u64,
) -> Result<(Image, TransmissionRecord)> {
    let z = codec.encode(x).map_err(|e| e.at("encode"))?;
    let trace = link.transport(&z, message_index)?;
    let x_hat = codec.decode(&trace.z_hat).map_err(|e| e.at("decode"))?;
    let mse = metrics::mse(x, &x_hat)?;
    let ms_ssim = if metrics::ms_ssim_applicable(x.height(), x.width(), RECORD_MS_SSIM_SCALES) {
        Some(metrics::ms_ssim(x, &x_hat, RECORD_MS_SSIM_SCALES)?)
    } else {
        None
    };
    let record = TransmissionRecord {
        image,
        snr_db: link.channel.snr_db,
        rho: codec.spec().rho(),
        mse,
        psnr: metrics::psnr_from_mse(mse, x.peak()),
        ssim: metrics::ssim(x, &x_hat)?,
        ms_ssim,
        crypto_std: rms(&trace.crypto_residual),
        channel_std: rms(&trace.channel_residual),
        compound_std: rms(&trace.compound_residual),
    };
    Ok((x_hat, record))
}

/// Root mean square; the residuals are centered so this is their spread
/// about zero.
fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    libm::sqrt(xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64)
}

/// Transmits every image at every SNR in `grid`.
///
/// Image `i` is always message `i`, so each SNR sees the same crypto
/// errors and channel noise stream and the comparison across SNRs is
/// paired. Records are ordered SNR-major.
pub fn sweep(images: &[Image], codec: &Codec, link: &Link, grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(crate::Error::invalid("SNR grid is empty"));
    }
    let mut records = Vec::with_capacity(images.len() * grid.len());
    let mut aggregates = Vec::new();
    for &snr in grid {
        let at_snr = link.with_snr(snr);
        let start = records.len();
        for (i, x) in images.iter().enumerate() {
            records.push(transmit(x, codec, &at_snr, i, i as u64)?.1);
        }
        if !images.is_empty() {
            aggregates.push(aggregate(snr, codec.spec().rho(), &records[start..]));
        }
    }
    Ok(SweepResult {
        records,
        aggregates,
    })
}

fn aggregate(snr_db: f64, rho: f64, rows: &[TransmissionRecord]) -> SweepAggregate {
    let col = |f: fn(&TransmissionRecord) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let psnr = col(|r| r.psnr);
    let ssim = col(|r| r.ssim);
    let ms: Option<Vec<f64>> = rows.iter().map(|r| r.ms_ssim).collect();
    // Pooled spread: root of the mean per-image variance.
    let pooled = |f: fn(&TransmissionRecord) -> f64| {
        libm::sqrt(stats::mean(&rows.iter().map(|r| f(r) * f(r)).collect::<Vec<_>>()))
    };
    SweepAggregate {
        snr_db,
        rho,
        count: rows.len(),
        psnr_mean: stats::mean(&psnr),
        psnr_std: spread(&psnr),
        ssim_mean: stats::mean(&ssim),
        ssim_std: spread(&ssim),
        ms_ssim_mean: ms.map(|v| stats::mean(&v)),
        crypto_std: pooled(|r| r.crypto_std),
        channel_std: pooled(|r| r.channel_std),
        compound_std: pooled(|r| r.compound_std),
    }
}

/// Population std; infinite PSNRs (lossless rows) give an infinite mean and
/// a NaN spread unless every row is lossless.
fn spread(xs: &[f64]) -> f64 {
    if xs.iter().all(|v| v.is_infinite() && *v > 0.0) {
        0.0
    } else {
        stats::std_dev(xs)
    }
}
