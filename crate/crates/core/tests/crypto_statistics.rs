//! Monte-Carlo checks of the sampler, the decryption residual and the
//! ciphertext distribution against independent closed forms.

use lwejscc_core::lattice::{
    centered, decrypt, derive_errors, encrypt, keygen, sample_discrete_gaussian, LweParams, REFERENCE_SIGMA_S,
};
use lwejscc_core::rng::{stream, Domain};
use lwejscc_core::stats;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact variance of round-half-away(N(0, s²)) by summing the lattice
/// probabilities, computed with statrs' normal CDF.
fn rounded_gaussian_variance(s: f64) -> f64 {
    use statrs::distribution::Normal;
    let n = Normal::new(0.0, s).unwrap();
    (1..200)
        .map(|m| {
            let m = m as f64;
            2.0 * m * m * (n.cdf(m + 0.5) - n.cdf(m - 0.5))
        })
        .sum()
}

#[test]
fn sampler_variance_matches_rounding_oracles() {
    let sigma = REFERENCE_SIGMA_S / (2.0 * std::f64::consts::PI).sqrt();
    let exact = rounded_gaussian_variance(sigma);
    let sheppard = sigma * sigma + 1.0 / 12.0;
    assert!((exact - sheppard).abs() / sheppard < 1e-3, "{exact} vs {sheppard}");

    let draws = sample_discrete_gaussian(REFERENCE_SIGMA_S, 1_000_000, &mut stream(5, Domain::Errors, 0));
    let xs: Vec<f64> = draws.iter().map(|&v| v as f64).collect();
    assert!(stats::mean(&xs).abs() < 0.02);
    let v = stats::variance(&xs);
    assert!((v - 12.60).abs() / 12.60 < 0.02, "variance {v}");
}

#[test]
fn sampler_is_symmetric_and_integer_valued() {
    let draws = sample_discrete_gaussian(REFERENCE_SIGMA_S, 200_000, &mut stream(6, Domain::Errors, 0));
    let pos = draws.iter().filter(|&&v| v > 0).count() as f64;
    let neg = draws.iter().filter(|&&v| v < 0).count() as f64;
    assert!((pos - neg).abs() / (pos + neg) < 0.01);
}

#[test]
fn decryption_residual_std_in_band() {
    let params = LweParams::reference(100);
    let keys = keygen(&params, 11, 12).unwrap();
    let z = vec![1234u32; params.k];
    let mut residuals = Vec::with_capacity(100_000);
    for m in 0..1000 {
        let ct = encrypt(&z, &keys.public, &derive_errors(13, m, &params)).unwrap();
        let out = decrypt(&ct, &keys).unwrap();
        residuals.extend(out.iter().map(|&v| centered(v as i64 - 1234, params.p) as f64));
    }
    let std = stats::std_dev(&residuals);
    assert!((235.0..=260.0).contains(&std), "residual std {std}");
    // Oracle: sqrt(2·n·v²) with v the per-entry error variance.
    let v: f64 = 12.60;
    let oracle = (2.0 * 192.0 * v * v).sqrt();
    assert!((std - oracle).abs() / oracle < 0.05, "{std} vs {oracle}");
}

#[test]
fn ciphertexts_look_uniform() {
    let params = LweParams::reference(32);
    let keys = keygen(&params, 21, 22).unwrap();
    let z = vec![0u32; params.k];
    let bins = 64;
    let mut counts = vec![0f64; bins];
    let mut first = Vec::new();
    let mut second = Vec::new();
    for m in 0..2000 {
        let ct = encrypt(&z, &keys.public, &derive_errors(23, m, &params)).unwrap();
        for &c in &ct.c {
            counts[c as usize * bins / params.p as usize] += 1.0;
        }
        first.push(ct.c[0] as f64);
        second.push(ct.c[1] as f64);
    }
    let total: f64 = counts.iter().sum();
    // Bin widths differ by at most one residue; use exact expectations.
    let chi2: f64 = (0..bins)
        .map(|b| {
            let lo = (b * params.p as usize).div_ceil(bins);
            let hi = ((b + 1) * params.p as usize).div_ceil(bins);
            let e = total * (hi - lo) as f64 / params.p as f64;
            (counts[b] - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p_value > 1e-3, "chi2 {chi2}, p {p_value}");
    assert!(stats::correlation(&first, &second).abs() < 0.1);
}
