//! LWE public-key encryption over `Z_p`.
//!
//! Public matrices and ciphertexts are stored as least non-negative residues
//! in `[0, p)`. The secret `S`, the masking matrix `U` and all error terms
//! are small signed integers drawn from a rounded Gaussian.
//!
//! With public key `(B, A) = (U − A·S, A)` and errors `(e1, e2, e3)`:
//!
//! ```text
//! c = Bᵀ·e1 + e3 + z̄   (mod p)
//! d = Aᵀ·e1 + e2        (mod p)
//! Sᵀ·d + c = z̄ + Sᵀ·e2 + Uᵀ·e1 + e3   (mod p)
//! ```

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_finite, check_len};
use crate::linalg::Mat;
use crate::rng::{self, Domain, Stream};
use crate::{Error, Result};

/// Modulus from the reference parameter set.
pub const REFERENCE_P: u32 = 4093;
/// Lattice dimension `n1 = n2` from the reference parameter set.
pub const REFERENCE_N: usize = 192;
/// Gaussian parameter from the reference parameter set.
pub const REFERENCE_SIGMA_S: f64 = 8.87;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LweParams {
    pub p: u32,
    pub n1: usize,
    pub n2: usize,
    pub sigma_s: f64,
    /// Plaintext length in symbols.
    pub k: usize,
}

impl LweParams {
    pub fn new(p: u32, n1: usize, n2: usize, sigma_s: f64, k: usize) -> Result<Self> {
        let params = LweParams {
            p,
            n1,
            n2,
            sigma_s,
            k,
        };
        params.validate()?;
        Ok(params)
    }

    /// `p = 4093`, `n1 = n2 = 192`, `σ_s = 8.87` with plaintext length `k`.
    pub fn reference(k: usize) -> Self {
        LweParams {
            p: REFERENCE_P,
            n1: REFERENCE_N,
            n2: REFERENCE_N,
            sigma_s: REFERENCE_SIGMA_S,
            k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::invalid(format!("modulus p = {} must be ≥ 2", self.p)));
        }
        if self.n1 == 0 || self.n2 == 0 || self.k == 0 {
            return Err(Error::invalid("n1, n2 and k must be ≥ 1"));
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return Err(Error::invalid("sigma_s must be positive and finite"));
        }
        Ok(())
    }

    /// Variance of one rounded-Gaussian sample: `σ_s²/2π + 1/12`
    /// (continuous variance plus the rounding term).
    pub fn error_variance(&self) -> f64 {
        self.sigma_s * self.sigma_s / (2.0 * core::f64::consts::PI) + 1.0 / 12.0
    }

    /// Predicted std of the decryption residual `Sᵀe2 + Uᵀe1 + e3`.
    pub fn residual_std(&self) -> f64 {
        let v = self.error_variance();
        libm::sqrt((self.n1 + self.n2) as f64 * v * v + v)
    }
}

/// Draws `count` samples of a zero-mean Gaussian with variance `σ_s²/2π`,
/// each rounded half away from zero.
pub fn sample_discrete_gaussian(sigma_s: f64, count: usize, rng: &mut Stream) -> Vec<i32> {
    let std = sigma_s / libm::sqrt(2.0 * core::f64::consts::PI);
    (0..count)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            libm::round(g * std) as i32
        })
        .collect()
}

/// Least non-negative residue of `v` modulo `p`.
#[inline]
pub fn reduce(v: i64, p: u32) -> u32 {
    v.rem_euclid(p as i64) as u32
}

/// Representative of `v mod p` in `(−p/2, p/2]`.
#[inline]
pub fn centered(v: i64, p: u32) -> i64 {
    let p = p as i64;
    let r = v.rem_euclid(p);
    if 2 * r > p {
        r - p
    } else {
        r
    }
}

/// Real representative of `r mod p` in `(−p/2, p/2]`.
#[inline]
pub fn centered_real(r: f64, p: u32) -> f64 {
    let p = p as f64;
    let m = real_mod(r, p);
    if 2.0 * m > p {
        m - p
    } else {
        m
    }
}

/// `r − p·⌊r/p⌋`, in `[0, p)`.
#[inline]
pub fn real_mod(r: f64, p: f64) -> f64 {
    let m = r - p * libm::floor(r / p);
    // r slightly below a multiple of p can round up to exactly p
    if m >= p {
        0.0
    } else {
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorTriple {
    pub e1: Vec<i32>,
    pub e2: Vec<i32>,
    pub e3: Vec<i32>,
    /// Stream index these errors were derived from.
    pub message_index: u64,
}

impl ErrorTriple {
    /// All-zero errors; encryption then degenerates to `c = z̄`, `d = 0`.
    pub fn zeros(params: &LweParams) -> Self {
        ErrorTriple {
            e1: alloc::vec![0; params.n1],
            e2: alloc::vec![0; params.n2],
            e3: alloc::vec![0; params.k],
            message_index: 0,
        }
    }

    fn check(&self, params: &LweParams) -> Result<()> {
        check_len("e1", params.n1, self.e1.len())?;
        check_len("e2", params.n2, self.e2.len())?;
        check_len("e3", params.k, self.e3.len())
    }
}

/// Errors for message `message_index` under the seed shared by sender and
/// receiver. Each index owns its own ChaCha stream.
pub fn derive_errors(shared_error_seed: u64, message_index: u64, params: &LweParams) -> ErrorTriple {
    let mut rng = rng::stream(shared_error_seed, Domain::Errors, message_index);
    let e1 = sample_discrete_gaussian(params.sigma_s, params.n1, &mut rng);
    let e2 = sample_discrete_gaussian(params.sigma_s, params.n2, &mut rng);
    let e3 = sample_discrete_gaussian(params.sigma_s, params.k, &mut rng);
    ErrorTriple {
        e1,
        e2,
        e3,
        message_index,
    }
}

/// Public half of a key pair: `B = U − A·S` (n1×k) and `A` (n1×n2).
///
/// Holds neither `S` nor the key seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub params: LweParams,
    pub b: Mat<u32>,
    pub a: Mat<u32>,
    pub lattice_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    /// `S`, n2×k, centered.
    pub s: Mat<i32>,
    pub key_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// `S` (n2×k) then `U` (n1×k) from the key seed's stream.
pub fn secret_matrices(params: &LweParams, key_seed: u64) -> (Mat<i32>, Mat<i32>) {
    let mut rng = rng::stream(key_seed, Domain::Secret, 0);
    let s = sample_discrete_gaussian(params.sigma_s, params.n2 * params.k, &mut rng);
    let u = sample_discrete_gaussian(params.sigma_s, params.n1 * params.k, &mut rng);
    (
        Mat::from_vec(params.n2, params.k, s).expect("shape"),
        Mat::from_vec(params.n1, params.k, u).expect("shape"),
    )
}

/// Uniform `A` over `[0, p)` from the lattice seed's stream.
pub fn lattice_matrix(params: &LweParams, lattice_seed: u64) -> Mat<u32> {
    let mut rng = rng::stream(lattice_seed, Domain::Lattice, 0);
    let data = (0..params.n1 * params.n2)
        .map(|_| rng.random_range(0..params.p))
        .collect();
    Mat::from_vec(params.n1, params.n2, data).expect("shape")
}

pub fn keygen(params: &LweParams, key_seed: u64, lattice_seed: u64) -> Result<KeyPair> {
    params.validate()?;
    let (s, u) = secret_matrices(params, key_seed);
    let a = lattice_matrix(params, lattice_seed);
    KeyPair::from_parts(params, s, &u, a, key_seed, lattice_seed)
}

impl KeyPair {
    /// Assembles a key pair from explicit matrices, computing `B = U − A·S`.
    pub fn from_parts(
        params: &LweParams,
        s: Mat<i32>,
        u: &Mat<i32>,
        a: Mat<u32>,
        key_seed: u64,
        lattice_seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if s.shape() != (params.n2, params.k) {
            return Err(Error::invalid("S must be n2×k"));
        }
        if u.shape() != (params.n1, params.k) {
            return Err(Error::invalid("U must be n1×k"));
        }
        if a.shape() != (params.n1, params.n2) {
            return Err(Error::invalid("A must be n1×n2"));
        }
        if let Some(&v) = a.as_slice().iter().find(|&&v| v >= params.p) {
            return Err(Error::OutOfRange {
                what: "A entry",
                value: v as i64,
                bound: params.p as i64,
            });
        }
        let mut b = Mat::zeros(params.n1, params.k);
        let mut acc = alloc::vec![0i64; params.k];
        for i in 0..params.n1 {
            acc.iter_mut().zip(u.row(i)).for_each(|(x, &uv)| *x = uv as i64);
            for (t, &a_it) in a.row(i).iter().enumerate() {
                let a_it = a_it as i64;
                for (x, &st) in acc.iter_mut().zip(s.row(t)) {
                    *x -= a_it * st as i64;
                }
            }
            for (dst, &x) in b.row_mut(i).iter_mut().zip(&acc) {
                *dst = reduce(x, params.p);
            }
        }
        Ok(KeyPair {
            public: PublicKey {
                params: *params,
                b,
                a,
                lattice_seed,
            },
            secret: SecretKey { s, key_seed },
        })
    }

    pub fn params(&self) -> &LweParams {
        &self.public.params
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub c: Vec<u32>,
    pub d: Vec<u32>,
    pub message_index: u64,
}

/// Channel-perturbed real-valued `ĉ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyCiphertext {
    pub c_hat: Vec<f64>,
}

fn check_plaintext(plaintext: &[u32], params: &LweParams) -> Result<()> {
    check_len("plaintext", params.k, plaintext.len())?;
    match plaintext.iter().find(|&&v| v >= params.p) {
        Some(&v) => Err(Error::OutOfRange {
            what: "plaintext symbol",
            value: v as i64,
            bound: params.p as i64,
        }),
        None => Ok(()),
    }
}

/// `Bᵀ·e1 + e3` and `Aᵀ·e1 + e2`, both reduced mod p.
pub fn encryption_masks(public: &PublicKey, errors: &ErrorTriple) -> Result<(Vec<u32>, Vec<u32>)> {
    let params = &public.params;
    errors.check(params)?;
    let mut c: Vec<i64> = errors.e3.iter().map(|&e| e as i64).collect();
    let mut d: Vec<i64> = errors.e2.iter().map(|&e| e as i64).collect();
    for (i, &e) in errors.e1.iter().enumerate() {
        if e == 0 {
            continue;
        }
        let e = e as i64;
        for (x, &bv) in c.iter_mut().zip(public.b.row(i)) {
            *x += bv as i64 * e;
        }
        for (x, &av) in d.iter_mut().zip(public.a.row(i)) {
            *x += av as i64 * e;
        }
    }
    let p = params.p;
    Ok((
        c.into_iter().map(|x| reduce(x, p)).collect(),
        d.into_iter().map(|x| reduce(x, p)).collect(),
    ))
}

pub fn encrypt(plaintext: &[u32], public: &PublicKey, errors: &ErrorTriple) -> Result<Ciphertext> {
    let params = &public.params;
    check_plaintext(plaintext, params)?;
    let (mask, d) = encryption_masks(public, errors)?;
    let c = mask
        .iter()
        .zip(plaintext)
        .map(|(&m, &z)| reduce(m as i64 + z as i64, params.p))
        .collect();
    Ok(Ciphertext {
        c,
        d,
        message_index: errors.message_index,
    })
}

/// `Sᵀ·d` as signed integers (not reduced).
fn secret_times_d(secret: &SecretKey, d: &[u32], params: &LweParams) -> Result<Vec<i64>> {
    check_len("d", params.n2, d.len())?;
    if secret.s.shape() != (params.n2, params.k) {
        return Err(Error::invalid("secret S shape does not match parameters"));
    }
    let mut out = alloc::vec![0i64; params.k];
    for (t, &dt) in d.iter().enumerate() {
        let dt = dt as i64;
        for (x, &st) in out.iter_mut().zip(secret.s.row(t)) {
            *x += st as i64 * dt;
        }
    }
    Ok(out)
}

/// `(Sᵀ·d + c) mod p`.
pub fn decrypt(ct: &Ciphertext, key: &KeyPair) -> Result<Vec<u32>> {
    let params = key.params();
    check_len("c", params.k, ct.c.len())?;
    let sd = secret_times_d(&key.secret, &ct.d, params)?;
    Ok(sd
        .iter()
        .zip(&ct.c)
        .map(|(&x, &c)| reduce(x + c as i64, params.p))
        .collect())
}

/// `real_mod(Sᵀ·d + ĉ, p)` elementwise.
pub fn decrypt_noisy(nct: &NoisyCiphertext, d: &[u32], key: &KeyPair) -> Result<Vec<f64>> {
    let params = key.params();
    check_len("c_hat", params.k, nct.c_hat.len())?;
    check_finite("c_hat", &nct.c_hat)?;
    let sd = secret_times_d(&key.secret, d, params)?;
    let p = params.p;
    Ok(sd
        .iter()
        .zip(&nct.c_hat)
        .map(|(&x, &ch)| real_mod(reduce(x, p) as f64 + ch, p as f64))
        .collect())
}

/// Removes the public mask `Bᵀe1 + e3` from `c`. Anyone holding the
/// errors (or the seed that generates them) recovers the plaintext.
pub fn strip_mask(ct: &Ciphertext, public: &PublicKey, errors: &ErrorTriple) -> Result<Vec<u32>> {
    let (mask, _) = encryption_masks(public, errors)?;
    check_len("c", mask.len(), ct.c.len())?;
    let p = public.params.p;
    Ok(ct
        .c
        .iter()
        .zip(&mask)
        .map(|(&c, &m)| reduce(c as i64 - m as i64, p))
        .collect())
}
