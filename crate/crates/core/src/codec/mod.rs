//! Source codecs mapping images to real latents scaled onto `[0, p)` and
//! back.
//!
//! Every codec works in "pixel units" internally; `latent_scale` (default
//! `p/256`) converts between pixel units and the latent range.

mod adam;
pub mod nn;
mod train;

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

pub use adam::{Adam, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_LEARNING_RATE};
pub use train::{
    bypass_gradients, evaluate, fit, gradients, surrogate_gradients, train_step, EpochSummary, FitConfig,
    FitReport, Gradients, Loss, TrainState, VALIDATION_INDEX_BASE,
};

use crate::error::check_len;
use crate::image::Image;
use crate::rng::{self, Domain};
use crate::{Error, Result};
use nn::{Activation, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecKind {
    Identity,
    Linear,
    Mlp,
}

impl FromStr for CodecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CodecKind::Identity),
            "linear" => Ok(CodecKind::Linear),
            "mlp" => Ok(CodecKind::Mlp),
            other => Err(Error::Unknown {
                what: "codec kind",
                name: other.to_string(),
            }),
        }
    }
}

impl CodecKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodecKind::Identity => "identity",
            CodecKind::Linear => "linear",
            CodecKind::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecSpec {
    pub kind: CodecKind,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Latent length (complex channel uses per image).
    pub k: usize,
    /// Hidden layer widths, mlp only; at most two (three dense layers).
    pub hidden: Vec<usize>,
    pub latent_scale: f64,
    /// Pixel peak `A`.
    pub peak: f64,
}

impl CodecSpec {
    pub fn identity(height: usize, width: usize, channels: usize, p: u32) -> Self {
        CodecSpec {
            kind: CodecKind::Identity,
            height,
            width,
            channels,
            k: height * width * channels,
            hidden: Vec::new(),
            latent_scale: p as f64 / 256.0,
            peak: crate::image::PEAK_8BIT,
        }
    }

    pub fn linear(height: usize, width: usize, channels: usize, k: usize, p: u32) -> Self {
        CodecSpec {
            kind: CodecKind::Linear,
            k,
            ..Self::identity(height, width, channels, p)
        }
    }

    pub fn mlp(height: usize, width: usize, channels: usize, k: usize, hidden: Vec<usize>, p: u32) -> Self {
        CodecSpec {
            kind: CodecKind::Mlp,
            k,
            hidden,
            ..Self::identity(height, width, channels, p)
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Channel symbols per pixel, `k/(H·W·C)`.
    pub fn rho(&self) -> f64 {
        self.k as f64 / self.pixels() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels() == 0 || self.k == 0 {
            return Err(Error::invalid("codec dimensions must be ≥ 1"));
        }
        if !(self.latent_scale > 0.0 && self.latent_scale.is_finite()) {
            return Err(Error::invalid("latent_scale must be positive"));
        }
        match self.kind {
            CodecKind::Identity if self.k != self.pixels() => Err(Error::invalid(alloc::format!(
                "identity codec needs k = H·W·C = {}, got {}",
                self.pixels(),
                self.k
            ))),
            CodecKind::Mlp if self.hidden.len() > 2 || self.hidden.contains(&0) => {
                Err(Error::invalid("mlp codec takes one or two non-empty hidden layers"))
            }
            _ => Ok(()),
        }
    }
}

/// Affine wrapper around a network: `out_scale · net(in_scale·x + in_offset)`.
#[derive(Debug, Clone, PartialEq)]
struct Stage {
    net: Network,
    in_scale: f64,
    in_offset: f64,
    out_scale: f64,
    /// Clamp the output to `[0, clamp]` (decoders only).
    clamp: Option<f64>,
}

impl Stage {
    fn input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * self.in_scale + self.in_offset).collect()
    }

    fn finish(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .map(|v| {
                let y = v * self.out_scale;
                match self.clamp {
                    Some(hi) => y.clamp(0.0, hi),
                    None => y,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codec {
    spec: CodecSpec,
    encoder: Option<Stage>,
    decoder: Option<Stage>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StageTrace {
    trace: Option<nn::Trace>,
    output: Vec<f64>,
}

impl StageTrace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

impl Codec {
    /// Builds a codec; trainable kinds are initialised from `init_seed`.
    pub fn new(spec: CodecSpec, init_seed: u64) -> Result<Self> {
        spec.validate()?;
        let n = spec.pixels();
        let ls = spec.latent_scale;
        let (encoder, decoder) = match spec.kind {
            CodecKind::Identity => (None, None),
            CodecKind::Linear => {
                let mut enc = Network::new(&[n, spec.k], Activation::Identity, Activation::Identity);
                let mut dec = Network::new(&[spec.k, n], Activation::Identity, Activation::Identity);
                enc.init_xavier(&mut rng::stream(init_seed, Domain::Init, 0), 1.0);
                dec.init_xavier(&mut rng::stream(init_seed, Domain::Init, 1), 1.0);
                (
                    Some(Stage {
                        net: enc,
                        in_scale: 1.0,
                        in_offset: 0.0,
                        out_scale: ls,
                        clamp: None,
                    }),
                    Some(Stage {
                        net: dec,
                        in_scale: 1.0 / ls,
                        in_offset: 0.0,
                        out_scale: 1.0,
                        clamp: Some(spec.peak),
                    }),
                )
            }
            CodecKind::Mlp => {
                let mut enc_sizes = alloc::vec![n];
                enc_sizes.extend_from_slice(&spec.hidden);
                enc_sizes.push(spec.k);
                let mut dec_sizes = alloc::vec![spec.k];
                dec_sizes.extend(spec.hidden.iter().rev());
                dec_sizes.push(n);
                let mut enc = Network::new(&enc_sizes, Activation::Tanh, Activation::Sigmoid);
                let mut dec = Network::new(&dec_sizes, Activation::Tanh, Activation::Sigmoid);
                // A wide initial latent spread so the quantizer sees several levels.
                enc.init_xavier(&mut rng::stream(init_seed, Domain::Init, 0), 3.0);
                dec.init_xavier(&mut rng::stream(init_seed, Domain::Init, 1), 1.0);
                (
                    Some(Stage {
                        net: enc,
                        in_scale: 2.0 / 256.0,
                        in_offset: -1.0,
                        out_scale: 256.0 * ls,
                        clamp: None,
                    }),
                    Some(Stage {
                        net: dec,
                        in_scale: 2.0 / (256.0 * ls),
                        in_offset: -1.0,
                        out_scale: spec.peak,
                        clamp: Some(spec.peak),
                    }),
                )
            }
        };
        Ok(Codec {
            spec,
            encoder,
            decoder,
        })
    }

    /// Linear codec whose encoder and decoder matrices are the identity
    /// (requires `k = H·W·C`).
    pub fn linear_identity(height: usize, width: usize, channels: usize, p: u32) -> Result<Self> {
        let n = height * width * channels;
        let mut codec = Codec::new(CodecSpec::linear(height, width, channels, n, p), 0)?;
        let mut eye = alloc::vec![0.0; n * n + n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        codec.set_encoder_params(&eye)?;
        codec.set_decoder_params(&eye)?;
        Ok(codec)
    }

    pub fn spec(&self) -> &CodecSpec {
        &self.spec
    }

    pub fn is_trainable(&self) -> bool {
        self.encoder.is_some()
    }

    pub fn encoder_params(&self) -> Vec<f64> {
        self.encoder.as_ref().map(|s| s.net.params()).unwrap_or_default()
    }

    pub fn decoder_params(&self) -> Vec<f64> {
        self.decoder.as_ref().map(|s| s.net.params()).unwrap_or_default()
    }

    pub fn set_encoder_params(&mut self, params: &[f64]) -> Result<()> {
        match &mut self.encoder {
            Some(s) => s.net.set_params(params),
            None => check_len("encoder parameters", 0, params.len()),
        }
    }

    pub fn set_decoder_params(&mut self, params: &[f64]) -> Result<()> {
        match &mut self.decoder {
            Some(s) => s.net.set_params(params),
            None => check_len("decoder parameters", 0, params.len()),
        }
    }

    fn check_image(&self, x: &Image) -> Result<()> {
        let s = &self.spec;
        if x.shape() != (s.height, s.width, s.channels) {
            return Err(Error::invalid(alloc::format!(
                "image shape {:?} does not match codec input {:?}",
                x.shape(),
                (s.height, s.width, s.channels)
            )));
        }
        Ok(())
    }

    pub fn encode(&self, x: &Image) -> Result<Vec<f64>> {
        Ok(self.encode_trace(x)?.output)
    }

    pub fn encode_trace(&self, x: &Image) -> Result<StageTrace> {
        self.check_image(x)?;
        Ok(match &self.encoder {
            None => StageTrace {
                trace: None,
                output: x.data().iter().map(|v| v * self.spec.latent_scale).collect(),
            },
            Some(stage) => {
                let trace = stage.net.forward_trace(&stage.input(x.data()));
                let output = stage.finish(trace.output());
                StageTrace {
                    trace: Some(trace),
                    output,
                }
            }
        })
    }

    pub fn decode(&self, z_hat: &[f64]) -> Result<Image> {
        let t = self.decode_trace(z_hat)?;
        self.to_image(t.output)
    }

    pub fn decode_trace(&self, z_hat: &[f64]) -> Result<StageTrace> {
        check_len("latent", self.spec.k, z_hat.len())?;
        crate::error::check_finite("latent", z_hat)?;
        Ok(match &self.decoder {
            None => StageTrace {
                trace: None,
                output: z_hat
                    .iter()
                    .map(|v| (v / self.spec.latent_scale).clamp(0.0, self.spec.peak))
                    .collect(),
            },
            Some(stage) => {
                let trace = stage.net.forward_trace(&stage.input(z_hat));
                let output = stage.finish(trace.output());
                StageTrace {
                    trace: Some(trace),
                    output,
                }
            }
        })
    }

    pub(crate) fn to_image(&self, data: Vec<f64>) -> Result<Image> {
        let s = &self.spec;
        Image::with_peak(s.height, s.width, s.channels, data, s.peak)
    }

    /// Backpropagates `∂loss/∂x̂` through the decoder. Returns the decoder
    /// parameter gradient and `∂loss/∂ẑ`.
    pub(crate) fn decoder_backward(&self, t: &StageTrace, grad_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let stage = self.decoder.as_ref().expect("trainable codec");
        let trace = t.trace.as_ref().expect("decoder trace");
        let hi = stage.clamp.unwrap_or(f64::INFINITY);
        let g_raw: Vec<f64> = grad_out
            .iter()
            .zip(trace.output())
            .map(|(g, raw)| {
                let y = raw * stage.out_scale;
                if (0.0..=hi).contains(&y) {
                    g * stage.out_scale
                } else {
                    0.0
                }
            })
            .collect();
        let mut gp = alloc::vec![0.0; stage.net.param_count()];
        let g_in = stage.net.backward(trace, &g_raw, &mut gp);
        (gp, g_in.iter().map(|g| g * stage.in_scale).collect())
    }

    /// Backpropagates `∂loss/∂z` through the encoder into its parameters.
    pub(crate) fn encoder_backward(&self, t: &StageTrace, grad_latent: &[f64]) -> Vec<f64> {
        let stage = self.encoder.as_ref().expect("trainable codec");
        let trace = t.trace.as_ref().expect("encoder trace");
        let g_raw: Vec<f64> = grad_latent.iter().map(|g| g * stage.out_scale).collect();
        let mut gp = alloc::vec![0.0; stage.net.param_count()];
        stage.net.backward(trace, &g_raw, &mut gp);
        gp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize, c: usize) -> Image {
        let n = h * w * c;
        Image::new(h, w, c, (0..n).map(|i| (i * 255 / (n - 1)) as f64).collect()).unwrap()
    }

    #[test]
    fn identity_scaling() {
        let codec = Codec::new(CodecSpec::identity(1, 2, 1, 4093), 0).unwrap();
        let x = Image::new(1, 2, 1, alloc::vec![0.0, 255.0]).unwrap();
        let z = codec.encode(&x).unwrap();
        assert_eq!(z, [0.0, 255.0 * 4093.0 / 256.0]);
        assert_eq!(codec.decode(&z).unwrap(), x);
    }

    #[test]
    fn identity_requires_full_latent() {
        let mut spec = CodecSpec::identity(4, 4, 1, 4093);
        spec.k = 8;
        assert!(Codec::new(spec, 0).is_err());
    }

    #[test]
    fn linear_identity_equals_identity() {
        let x = ramp(4, 4, 1);
        let id = Codec::new(CodecSpec::identity(4, 4, 1, 4093), 0).unwrap();
        let lin = Codec::linear_identity(4, 4, 1, 4093).unwrap();
        let (a, b) = (id.encode(&x).unwrap(), lin.encode(&x).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
        let back = lin.decode(&b).unwrap();
        for (u, v) in back.data().iter().zip(x.data()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_latent_gives_constant_image() {
        for codec in [
            Codec::new(CodecSpec::identity(3, 3, 1, 4093), 0).unwrap(),
            Codec::linear_identity(3, 3, 1, 4093).unwrap(),
        ] {
            let img = codec.decode(&[0.0; 9]).unwrap();
            assert!(img.data().iter().all(|&v| v == img.data()[0]));
        }
    }

    #[test]
    fn zero_weight_mlp_emits_squashed_bias() {
        let spec = CodecSpec::mlp(4, 4, 1, 6, alloc::vec![8], 4093);
        let mut codec = Codec::new(spec, 3).unwrap();
        let n = codec.encoder_params().len();
        let mut params = alloc::vec![0.0; n];
        // Output-layer biases are the last k entries.
        let bias = 0.7;
        params[n - 6..].iter_mut().for_each(|b| *b = bias);
        codec.set_encoder_params(&params).unwrap();
        let z = codec.encode(&ramp(4, 4, 1)).unwrap();
        let expected = 4093.0 / (1.0 + libm::exp(-bias));
        for v in z {
            assert!((v - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn mlp_latent_in_range() {
        let codec = Codec::new(CodecSpec::mlp(4, 4, 1, 8, alloc::vec![16], 4093), 9).unwrap();
        let z = codec.encode(&ramp(4, 4, 1)).unwrap();
        assert!(z.iter().all(|&v| (0.0..4093.0).contains(&v)));
        let img = codec.decode(&z).unwrap();
        assert!(img.data().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn shape_errors() {
        let codec = Codec::new(CodecSpec::identity(2, 2, 1, 4093), 0).unwrap();
        assert!(codec.encode(&ramp(2, 3, 1)).is_err());
        assert!(codec.decode(&[0.0; 3]).is_err());
        assert!(Codec::new(CodecSpec::mlp(2, 2, 1, 2, alloc::vec![2, 2, 2], 4093), 0).is_err());
        assert!("conv".parse::<CodecKind>().is_err());
        assert_eq!("mlp".parse::<CodecKind>().unwrap(), CodecKind::Mlp);
    }
}
