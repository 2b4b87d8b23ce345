//! Secure joint source-channel transmission over an AWGN link.
//!
//! The chain is: source codec → uniform quantizer onto `Z_p` → LWE public-key
//! encryption → QAM modulation → AWGN channel → likelihood-weighted soft
//! demodulation → noisy decryption → soft dequantization → decoder.
//!
//! Everything in this crate is pure computation over explicit seeds and
//! runs without `std` (an allocator is required). File formats, the CLI and
//! reporting live in the companion `lwejscc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod dataset;
mod error;
pub mod image;
pub mod lattice;
pub mod linalg;
pub mod metrics;
pub mod modem;
pub mod pipeline;
pub mod quantization;
pub mod rng;
pub mod security;
pub mod stats;

pub use error::{Error, Result};
pub use image::Image;
pub use lattice::{Ciphertext, ErrorTriple, KeyPair, LweParams, NoisyCiphertext, PublicKey, SecretKey};
pub use modem::{ChannelModel, Constellation};
pub use quantization::{QuantizedLatent, Quantizer};
