//! Training through the secure link with the gradient-skip rule.
//!
//! Forward: the real chain (hard quantization, encryption, channel,
//! decryption, dequantization). Backward: `∂l/∂z̄ = ∂l/∂ẑ`, then the soft
//! quantization Jacobian from `z̄` back to `z`.

use alloc::vec::Vec;

use super::{Adam, Codec};
use crate::image::Image;
use crate::metrics;
use crate::pipeline::Link;
use crate::quantization::{anneal_sigma_q, Quantizer, SIGMA_Q_INIT};
use crate::rng::{self, Domain};
use crate::{Error, Result};
use rand::seq::SliceRandom;

/// Message indices at or above this are reserved for validation so they
/// never collide with training messages.
pub const VALIDATION_INDEX_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Mse,
    OneMinusSsim,
}

impl Loss {
    /// Loss value and its gradient with respect to `x_hat`.
    pub fn value_and_grad(self, x: &Image, x_hat: &Image) -> Result<(f64, Vec<f64>)> {
        match self {
            Loss::Mse => {
                let n = x.len() as f64;
                let mse = metrics::mse(x, x_hat)?;
                let grad = x_hat.data().iter().zip(x.data()).map(|(a, b)| 2.0 * (a - b) / n).collect();
                Ok((mse, grad))
            }
            Loss::OneMinusSsim => {
                let (s, g) = metrics::ssim_with_grad(x, x_hat)?;
                Ok((1.0 - s, g.into_iter().map(|v| -v).collect()))
            }
        }
    }
}

impl core::str::FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Loss::Mse),
            "ssim" | "1-ssim" => Ok(Loss::OneMinusSsim),
            other => Err(Error::Unknown {
                what: "loss",
                name: alloc::string::ToString::to_string(other),
            }),
        }
    }
}

/// Batch-averaged loss and parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub encoder: Vec<f64>,
    pub decoder: Vec<f64>,
}

/// Shared backward pass. `channel` maps the latent `z` of message `index`
/// to the decoder input `ẑ`; whatever it does is treated as the identity
/// on `z̄` in the backward pass.
fn batch_gradients<F>(
    codec: &Codec,
    soft: &Quantizer,
    batch: &[Image],
    indices: &[u64],
    loss: Loss,
    mut channel: F,
) -> Result<Gradients>
where
    F: FnMut(&[f64], u64) -> Result<Vec<f64>>,
{
    if !codec.is_trainable() {
        return Err(Error::invalid("identity codec has no parameters to train"));
    }
    crate::error::check_len("message indices", batch.len(), indices.len())?;
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let mut out = Gradients {
        loss: 0.0,
        encoder: alloc::vec![0.0; codec.encoder_params().len()],
        decoder: alloc::vec![0.0; codec.decoder_params().len()],
    };
    let scale = 1.0 / batch.len() as f64;
    for (x, &index) in batch.iter().zip(indices) {
        let enc = codec.encode_trace(x)?;
        let z_hat = channel(enc.output(), index)?;
        let dec = codec.decode_trace(&z_hat)?;
        let x_hat = codec.to_image(dec.output().to_vec())?;
        let (l, g_x) = loss.value_and_grad(x, &x_hat)?;
        let (g_dec, g_z_hat) = codec.decoder_backward(&dec, &g_x);
        let (_, jac) = soft.soft_quantize_with_grad(enc.output())?;
        let g_z: Vec<f64> = g_z_hat.iter().zip(&jac).map(|(g, j)| g * j).collect();
        let g_enc = codec.encoder_backward(&enc, &g_z);
        out.loss += l * scale;
        out.encoder.iter_mut().zip(&g_enc).for_each(|(a, b)| *a += b * scale);
        out.decoder.iter_mut().zip(&g_dec).for_each(|(a, b)| *a += b * scale);
    }
    Ok(out)
}

fn soft_quantizer(link: &Link, sigma_q: f64) -> Quantizer {
    let mut q = link.quantizer.clone();
    q.sigma_q = sigma_q;
    q
}

/// Gradient-skip gradients through the full link.
pub fn gradients(
    codec: &Codec,
    batch: &[Image],
    indices: &[u64],
    link: &Link,
    sigma_q: f64,
    loss: Loss,
) -> Result<Gradients> {
    let soft = soft_quantizer(link, sigma_q);
    batch_gradients(codec, &soft, batch, indices, loss, |z, i| Ok(link.transport(z, i)?.z_hat))
}

/// Exact gradients of the differentiable surrogate
/// `decode(soft_quantize(encode(x)))`.
pub fn surrogate_gradients(codec: &Codec, soft: &Quantizer, batch: &[Image], loss: Loss) -> Result<Gradients> {
    let indices = alloc::vec![0; batch.len()];
    batch_gradients(codec, soft, batch, &indices, loss, |z, _| soft.soft_quantize(z))
}

/// Gradients when encryption, channel and decryption are replaced by the
/// identity on `z̄`: `ẑ = soft_dequantize(hard_quantize(z))`.
pub fn bypass_gradients(
    codec: &Codec,
    batch: &[Image],
    link: &Link,
    sigma_q: f64,
    loss: Loss,
) -> Result<Gradients> {
    let soft = soft_quantizer(link, sigma_q);
    let q = &link.quantizer;
    let indices = alloc::vec![0; batch.len()];
    batch_gradients(codec, &soft, batch, &indices, loss, |z, _| {
        let bar: Vec<f64> = q.hard_quantize(z)?.values.iter().map(|&v| v as f64).collect();
        q.soft_dequantize(&bar)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub codec: Codec,
    pub step: u64,
    pub sigma_q: f64,
    /// One optimizer over the encoder parameters followed by the decoder
    /// parameters.
    pub optimizer: Adam,
}

impl TrainState {
    pub fn new(codec: Codec, learning_rate: f64) -> Self {
        let count = codec.encoder_params().len() + codec.decoder_params().len();
        TrainState {
            codec,
            step: 0,
            sigma_q: SIGMA_Q_INIT,
            optimizer: Adam::new(count, learning_rate),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.optimizer.learning_rate
    }
}

/// One Adam update on `batch` sent as messages `indices`. Returns the batch
/// loss before the update.
pub fn train_step(state: &mut TrainState, batch: &[Image], indices: &[u64], link: &Link, loss: Loss) -> Result<f64> {
    let g = gradients(&state.codec, batch, indices, link, state.sigma_q, loss)?;
    if !g.loss.is_finite() || g.encoder.iter().chain(&g.decoder).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training loss or gradient").at("train_step"));
    }
    let split = g.encoder.len();
    let mut params = state.codec.encoder_params();
    params.extend(state.codec.decoder_params());
    let mut grads = g.encoder;
    grads.extend(g.decoder);
    state.optimizer.step(&mut params, &grads);
    state.codec.set_encoder_params(&params[..split])?;
    state.codec.set_decoder_params(&params[split..])?;
    state.step += 1;
    state.sigma_q = anneal_sigma_q(state.step, state.sigma_q);
    Ok(g.loss)
}

/// Mean loss over `images` through the full link; image `i` is message
/// `base + i`.
pub fn evaluate(codec: &Codec, link: &Link, images: &[Image], base: u64, loss: Loss) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let mut total = 0.0;
    for (i, x) in images.iter().enumerate() {
        let z = codec.encode(x)?;
        let x_hat = codec.decode(&link.transport(&z, base + i as u64)?.z_hat)?;
        total += loss.value_and_grad(x, &x_hat)?.0;
    }
    Ok(total / images.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub max_steps: u64,
    pub learning_rate: f64,
    pub loss: Loss,
    /// Stop after this many epochs without validation improvement.
    pub patience: usize,
    /// Multiply the learning rate by `decay_factor` after this many
    /// stagnant epochs.
    pub decay_after: usize,
    pub decay_factor: f64,
    pub shuffle_seed: u64,
    pub sigma_q_init: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            batch_size: 4,
            max_epochs: 1000,
            max_steps: 5000,
            learning_rate: super::DEFAULT_LEARNING_RATE,
            loss: Loss::Mse,
            patience: 10,
            decay_after: 5,
            decay_factor: 0.8,
            shuffle_seed: 0,
            sigma_q_init: SIGMA_Q_INIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub steps: u64,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub learning_rate: f64,
    pub sigma_q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Validation loss of the untrained codec.
    pub initial_validation: f64,
    pub best_validation: f64,
    pub epochs: Vec<EpochSummary>,
    pub steps: u64,
}

/// Mini-batch training with per-epoch validation, learning-rate decay and
/// early stopping. The best validation parameters are restored at the end.
pub fn fit(
    codec: Codec,
    train: &[Image],
    validation: &[Image],
    link: &Link,
    cfg: &FitConfig,
) -> Result<(Codec, FitReport)> {
    if train.is_empty() || cfg.batch_size == 0 {
        return Err(Error::invalid("training needs images and a non-zero batch size"));
    }
    let mut state = TrainState::new(codec, cfg.learning_rate);
    state.sigma_q = cfg.sigma_q_init;
    let initial = evaluate(&state.codec, link, validation, VALIDATION_INDEX_BASE, cfg.loss)?;
    let mut best = (initial, state.codec.clone());
    let mut report = FitReport {
        initial_validation: initial,
        best_validation: initial,
        epochs: Vec::new(),
        steps: 0,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stagnant = 0;
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut indices = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.max_epochs {
        if state.step >= cfg.max_steps {
            break;
        }
        order.shuffle(&mut rng::stream(cfg.shuffle_seed, Domain::Shuffle, epoch as u64));
        let mut train_total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            if state.step >= cfg.max_steps {
                break;
            }
            batch.clear();
            indices.clear();
            for (j, &i) in chunk.iter().enumerate() {
                batch.push(train[i].clone());
                // A fresh message (errors and channel noise) for every sample.
                indices.push(state.step * cfg.batch_size as u64 + j as u64);
            }
            train_total += train_step(&mut state, &batch, &indices, link, cfg.loss)?;
            batches += 1;
        }
        let val = evaluate(&state.codec, link, validation, VALIDATION_INDEX_BASE, cfg.loss)?;
        report.epochs.push(EpochSummary {
            epoch,
            steps: state.step,
            train_loss: train_total / batches.max(1) as f64,
            validation_loss: val,
            learning_rate: state.learning_rate(),
            sigma_q: state.sigma_q,
        });
        if val < best.0 {
            best = (val, state.codec.clone());
            stagnant = 0;
        } else {
            stagnant += 1;
            if cfg.decay_after > 0 && stagnant % cfg.decay_after == 0 {
                state.optimizer.learning_rate *= cfg.decay_factor;
            }
            if stagnant >= cfg.patience {
                break;
            }
        }
    }
    report.best_validation = best.0;
    report.steps = state.step;
    Ok((best.1, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecSpec;
    use crate::lattice::{keygen, LweParams};

    fn images(count: usize, seed: u64) -> Vec<Image> {
        use rand::Rng;
        let mut r = rng::stream(seed, Domain::Data, 0);
        (0..count)
            .map(|_| Image::new(4, 4, 1, (0..16).map(|_| r.random_range(0..256) as f64).collect()).unwrap())
            .collect()
    }

    fn link(k: usize, p: u32) -> Link {
        let params = LweParams::new(p, 4, 4, 1.0, k).unwrap();
        let keys = keygen(&params, 5, 6).unwrap();
        let levels = if p < 64 { 8 } else { 16 };
        let mut link = Link::new(keys, levels, 1.0, f64::INFINITY, 5.0, 7, 8).unwrap();
        link.zero_crypto_errors = true;
        link
    }

    fn all_params(c: &Codec) -> Vec<f64> {
        let mut v = c.encoder_params();
        v.extend(c.decoder_params());
        v
    }

    fn set_all(c: &mut Codec, v: &[f64]) {
        let n = c.encoder_params().len();
        c.set_encoder_params(&v[..n]).unwrap();
        c.set_decoder_params(&v[n..]).unwrap();
    }

    fn surrogate_loss(c: &Codec, soft: &Quantizer, batch: &[Image], loss: Loss) -> f64 {
        let mut total = 0.0;
        for x in batch {
            let z = soft.soft_quantize(&c.encode(x).unwrap()).unwrap();
            total += loss.value_and_grad(x, &c.decode(&z).unwrap()).unwrap().0;
        }
        total / batch.len() as f64
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let p = 40;
        let mut soft = Quantizer::uniform(p, 8).unwrap();
        soft.sigma_q = 0.2;
        let batch = images(3, 1);
        for (loss, spec) in [
            (Loss::Mse, CodecSpec::mlp(4, 4, 1, 5, alloc::vec![6], p)),
            (Loss::OneMinusSsim, CodecSpec::mlp(4, 4, 1, 5, alloc::vec![6, 4], p)),
        ] {
            let mut codec = Codec::new(spec, 2).unwrap();
            let g = surrogate_gradients(&codec, &soft, &batch, loss).unwrap();
            let mut analytic = g.encoder.clone();
            analytic.extend(&g.decoder);
            let base = all_params(&codec);
            let h = 1e-6;
            let mut worst: f64 = 0.0;
            for i in 0..base.len() {
                let mut v = base.clone();
                v[i] += h;
                set_all(&mut codec, &v);
                let up = surrogate_loss(&codec, &soft, &batch, loss);
                v[i] -= 2.0 * h;
                set_all(&mut codec, &v);
                let down = surrogate_loss(&codec, &soft, &batch, loss);
                let fd = (up - down) / (2.0 * h);
                let scale = fd.abs().max(analytic[i].abs()).max(1e-4);
                worst = worst.max((fd - analytic[i]).abs() / scale);
            }
            set_all(&mut codec, &base);
            assert!(worst < 1e-3, "{loss:?}: worst relative error {worst}");
        }
    }

    #[test]
    fn link_gradient_equals_identity_bypass() {
        let l = link(6, 4093);
        let codec = Codec::new(CodecSpec::mlp(4, 4, 1, 6, alloc::vec![8], 4093), 3).unwrap();
        let batch = images(2, 4);
        let via_link = gradients(&codec, &batch, &[0, 1], &l, 5.0, Loss::Mse).unwrap();
        let bypass = bypass_gradients(&codec, &batch, &l, 5.0, Loss::Mse).unwrap();
        assert_eq!(via_link, bypass);
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let l = link(6, 4093);
        let codec = Codec::new(CodecSpec::mlp(4, 4, 1, 6, alloc::vec![8], 4093), 3).unwrap();
        let before = all_params(&codec);
        let mut state = TrainState::new(codec, 0.0);
        let batch = images(2, 4);
        for s in 0..20 {
            train_step(&mut state, &batch, &[2 * s, 2 * s + 1], &l, Loss::Mse).unwrap();
        }
        assert_eq!(all_params(&state.codec), before);
        assert_eq!(state.step, 20);
    }

    #[test]
    fn identity_codec_is_not_trainable() {
        let l = link(16, 4093);
        let codec = Codec::new(CodecSpec::identity(4, 4, 1, 4093), 0).unwrap();
        let mut state = TrainState::new(codec, 1e-3);
        assert!(train_step(&mut state, &images(1, 0), &[0], &l, Loss::Mse).is_err());
    }

    #[test]
    fn sigma_q_follows_schedule() {
        let l = link(6, 4093);
        let codec = Codec::new(CodecSpec::linear(4, 4, 1, 6, 4093), 3).unwrap();
        let mut state = TrainState::new(codec, 1e-4);
        let batch = images(1, 4);
        let mut expected = SIGMA_Q_INIT;
        for s in 1..=2003u64 {
            train_step(&mut state, &batch, &[s], &l, Loss::Mse).unwrap();
            expected = anneal_sigma_q(s, expected);
        }
        assert_eq!(state.sigma_q, expected);
        assert_eq!(state.sigma_q, 5.0 + 5.0 * 4.0);
    }

    #[test]
    fn identity_like_linear_codec_improves_without_noise() {
        let l = link(16, 4093);
        let mut codec = Codec::linear_identity(4, 4, 1, 4093).unwrap();
        // Perturb the decoder so there is something to learn.
        let mut dec = codec.decoder_params();
        dec.iter_mut().enumerate().for_each(|(i, w)| *w = *w * 0.5 + (i % 7) as f64 * 0.01);
        codec.set_decoder_params(&dec).unwrap();
        let data = images(8, 9);
        let before = evaluate(&codec, &l, &data, 0, Loss::Mse).unwrap();
        let mut state = TrainState::new(codec, 1e-3);
        for s in 0..2000u64 {
            let i = (s % 8) as usize;
            train_step(&mut state, &data[i..i + 1], &[s], &l, Loss::Mse).unwrap();
        }
        let after = evaluate(&state.codec, &l, &data, 0, Loss::Mse).unwrap();
        assert!(after < before, "{after} !< {before}");
    }
}
