//! Codec parameter files (TOML): the codec description plus the encoder
//! and decoder parameter vectors.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use lwejscc_core::codec::{Codec, CodecKind, CodecSpec};
use serde::{Deserialize, Serialize};

pub const CODEC_FORMAT: &str = "lwejscc-codec/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRecord {
    kind: String,
    height: usize,
    width: usize,
    channels: usize,
    k: usize,
    hidden: Vec<usize>,
    latent_scale: f64,
    peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodecFile {
    format: String,
    spec: SpecRecord,
    encoder: Vec<f64>,
    decoder: Vec<f64>,
}

pub fn to_string(codec: &Codec) -> Result<String> {
    let s = codec.spec();
    Ok(toml::to_string(&CodecFile {
        format: CODEC_FORMAT.into(),
        spec: SpecRecord {
            kind: s.kind.as_str().into(),
            height: s.height,
            width: s.width,
            channels: s.channels,
            k: s.k,
            hidden: s.hidden.clone(),
            latent_scale: s.latent_scale,
            peak: s.peak,
        },
        encoder: codec.encoder_params(),
        decoder: codec.decoder_params(),
    })?)
}

pub fn parse(text: &str) -> Result<Codec> {
    let f: CodecFile = toml::from_str(text).context("parsing codec file")?;
    ensure!(f.format == CODEC_FORMAT, "unsupported codec format `{}`", f.format);
    let kind: CodecKind = f.spec.kind.parse()?;
    let spec = CodecSpec {
        kind,
        height: f.spec.height,
        width: f.spec.width,
        channels: f.spec.channels,
        k: f.spec.k,
        hidden: f.spec.hidden,
        latent_scale: f.spec.latent_scale,
        peak: f.spec.peak,
    };
    let mut codec = Codec::new(spec, 0)?;
    codec.set_encoder_params(&f.encoder)?;
    codec.set_decoder_params(&f.decoder)?;
    Ok(codec)
}

pub fn write(codec: &Codec, path: &Path) -> Result<()> {
    std::fs::write(path, to_string(codec)?).with_context(|| format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Result<Codec> {
    parse(&std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_round_trip_bit_exactly() {
        let codec = Codec::new(CodecSpec::mlp(4, 4, 1, 3, vec![5], 4093), 17).unwrap();
        let back = parse(&to_string(&codec).unwrap()).unwrap();
        assert_eq!(back, codec);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let codec = Codec::new(CodecSpec::linear(2, 2, 1, 2, 4093), 1).unwrap();
        let text = to_string(&codec).unwrap().replace("decoder = [", "decoder = [0.5, ");
        assert!(parse(&text).is_err());
    }
}
