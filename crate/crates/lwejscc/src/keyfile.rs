//! Key files (TOML).
//!
//! The public file carries the parameters, the lattice seed and `B`; `A`
//! is regenerated from the lattice seed. The secret file carries `S` and
//! the key seed. Neither file is useful without the other for decryption,
//! and the public file contains nothing derived from the key seed except
//! `B`.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use lwejscc_core::lattice::{lattice_matrix, KeyPair, LweParams, PublicKey, SecretKey};
use lwejscc_core::linalg::Mat;
use serde::{Deserialize, Serialize};

pub const PUBLIC_FORMAT: &str = "lwejscc-public/1";
pub const SECRET_FORMAT: &str = "lwejscc-secret/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsRecord {
    p: u32,
    n1: usize,
    n2: usize,
    sigma_s: f64,
    k: usize,
}

impl From<&LweParams> for ParamsRecord {
    fn from(p: &LweParams) -> Self {
        ParamsRecord {
            p: p.p,
            n1: p.n1,
            n2: p.n2,
            sigma_s: p.sigma_s,
            k: p.k,
        }
    }
}

impl ParamsRecord {
    fn params(&self) -> Result<LweParams> {
        Ok(LweParams::new(self.p, self.n1, self.n2, self.sigma_s, self.k)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PublicFile {
    format: String,
    params: ParamsRecord,
    lattice_seed: u64,
    /// `B`, n1×k row-major.
    b: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretFile {
    format: String,
    params: ParamsRecord,
    key_seed: u64,
    lattice_seed: u64,
    /// `S`, n2×k row-major, centered.
    s: Vec<i32>,
}

pub fn public_to_string(key: &PublicKey) -> Result<String> {
    Ok(toml::to_string(&PublicFile {
        format: PUBLIC_FORMAT.into(),
        params: (&key.params).into(),
        lattice_seed: key.lattice_seed,
        b: key.b.as_slice().to_vec(),
    })?)
}

pub fn secret_to_string(keys: &KeyPair) -> Result<String> {
    Ok(toml::to_string(&SecretFile {
        format: SECRET_FORMAT.into(),
        params: keys.params().into(),
        key_seed: keys.secret.key_seed,
        lattice_seed: keys.public.lattice_seed,
        s: keys.secret.s.as_slice().to_vec(),
    })?)
}

pub fn parse_public(text: &str) -> Result<PublicKey> {
    let f: PublicFile = toml::from_str(text).context("parsing public key")?;
    ensure!(f.format == PUBLIC_FORMAT, "unsupported public key format `{}`", f.format);
    let params = f.params.params()?;
    if let Some(&v) = f.b.iter().find(|&&v| v >= params.p) {
        bail!("public key entry {v} is not below p = {}", params.p);
    }
    Ok(PublicKey {
        b: Mat::from_vec(params.n1, params.k, f.b)?,
        a: lattice_matrix(&params, f.lattice_seed),
        lattice_seed: f.lattice_seed,
        params,
    })
}

pub fn parse_keypair(public: &str, secret: &str) -> Result<KeyPair> {
    let public = parse_public(public)?;
    let f: SecretFile = toml::from_str(secret).context("parsing secret key")?;
    ensure!(f.format == SECRET_FORMAT, "unsupported secret key format `{}`", f.format);
    let params = f.params.params()?;
    ensure!(params == public.params, "public and secret keys have different parameters");
    ensure!(f.lattice_seed == public.lattice_seed, "public and secret keys use different lattices");
    Ok(KeyPair {
        secret: SecretKey {
            s: Mat::from_vec(params.n2, params.k, f.s)?,
            key_seed: f.key_seed,
        },
        public,
    })
}

pub fn write_keypair(keys: &KeyPair, public: &Path, secret: &Path) -> Result<()> {
    std::fs::write(public, public_to_string(&keys.public)?).with_context(|| format!("writing {}", public.display()))?;
    std::fs::write(secret, secret_to_string(keys)?).with_context(|| format!("writing {}", secret.display()))?;
    Ok(())
}

pub fn read_keypair(public: &Path, secret: &Path) -> Result<KeyPair> {
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    parse_keypair(&read(public)?, &read(secret)?)
}
