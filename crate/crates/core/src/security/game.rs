//! The IND-CPA game: fresh keys, a hidden bit `b`, an encryption of `M_b`,
//! and a distinguisher guessing `b`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;

use super::learn::Logistic;
use crate::lattice::{
    self, centered, derive_errors, keygen, sample_discrete_gaussian, Ciphertext, ErrorTriple, LweParams, PublicKey,
};
use crate::quantization::build_centroids;
use crate::rng::{self, Domain, Stream};
use crate::stats::wilson_interval;
use crate::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistinguisherKind {
    MarginalChiSquare,
    TrainedClassifier,
}

impl core::str::FromStr for DistinguisherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal_chisq" => Ok(DistinguisherKind::MarginalChiSquare),
            "trained_classifier" => Ok(DistinguisherKind::TrainedClassifier),
            other => Err(Error::Unknown {
                what: "distinguisher",
                name: alloc::string::ToString::to_string(other),
            }),
        }
    }
}

impl DistinguisherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistinguisherKind::MarginalChiSquare => "marginal_chisq",
            DistinguisherKind::TrainedClassifier => "trained_classifier",
        }
    }
}

/// What the challenger does with `M_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Honest,
    /// Sabotage: returns `M_b` unencrypted.
    Plaintext,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub trials: usize,
    pub params: LweParams,
    pub seed: u64,
    /// Give the distinguisher the per-message errors (equivalently, the
    /// shared error seed).
    pub eve_knows_error_seed: bool,
    pub oracle: OracleMode,
    /// Test hook: expose `b` to the distinguisher.
    pub reveal_bit: bool,
    /// `(M_0, M_1)`; `None` means all-minimum vs all-maximum centroid.
    pub plaintexts: Option<(Vec<u32>, Vec<u32>)>,
    /// Quantizer levels used for the default plaintext pair.
    pub levels: usize,
    /// Encryptions per hypothesis the distinguisher may request per trial.
    pub samples_per_hypothesis: usize,
    pub bins: usize,
    pub classifier_epochs: usize,
}

impl GameConfig {
    pub fn new(params: LweParams, trials: usize, seed: u64) -> Self {
        GameConfig {
            trials,
            params,
            seed,
            eve_knows_error_seed: false,
            oracle: OracleMode::Honest,
            reveal_bit: false,
            plaintexts: None,
            levels: crate::quantization::DEFAULT_LEVELS,
            samples_per_hypothesis: 32,
            bins: 16,
            classifier_epochs: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trials < 100 {
            return Err(Error::invalid("the game needs at least 100 trials"));
        }
        if self.bins == 0 || self.samples_per_hypothesis == 0 {
            return Err(Error::invalid("bins and samples per hypothesis must be ≥ 1"));
        }
        if let Some((m0, m1)) = &self.plaintexts {
            crate::error::check_len("M_0", self.params.k, m0.len())?;
            crate::error::check_len("M_1", self.params.k, m1.len())?;
        }
        Ok(())
    }

    fn plaintext_pair(&self) -> Result<(Vec<u32>, Vec<u32>)> {
        if let Some(pair) = &self.plaintexts {
            return Ok(pair.clone());
        }
        let c = build_centroids(self.params.p, self.levels)?;
        let k = self.params.k;
        Ok((alloc::vec![c[0]; k], alloc::vec![*c.last().expect("≥ 1 level"); k]))
    }
}

/// Everything the distinguisher sees in one trial.
pub struct TrialView<'a> {
    pub public: &'a PublicKey,
    pub m0: &'a [u32],
    pub m1: &'a [u32],
    pub challenge: &'a Ciphertext,
    /// The challenge's errors, when Eve knows the shared error seed.
    pub errors: Option<&'a ErrorTriple>,
    /// Test hook only.
    pub revealed_bit: Option<bool>,
    oracle: OracleMode,
}

impl TrialView<'_> {
    /// The `c` part of an encryption of `m` under fresh errors from `rng`,
    /// as the challenger would produce it.
    pub fn encrypt_c(&self, m: &[u32], rng: &mut Stream) -> Vec<u32> {
        match self.oracle {
            OracleMode::Plaintext => m.to_vec(),
            OracleMode::Honest => {
                let params = &self.public.params;
                let e1 = sample_discrete_gaussian(params.sigma_s, params.n1, rng);
                let e3 = sample_discrete_gaussian(params.sigma_s, params.k, rng);
                let mut c: Vec<i64> = m.iter().zip(&e3).map(|(&v, &e)| v as i64 + e as i64).collect();
                for (i, &e) in e1.iter().enumerate() {
                    let e = e as i64;
                    for (x, &bv) in c.iter_mut().zip(self.public.b.row(i)) {
                        *x += bv as i64 * e;
                    }
                }
                c.into_iter().map(|x| lattice::reduce(x, params.p)).collect()
            }
        }
    }

    /// With known errors the mask can be removed outright.
    fn unmasked(&self) -> Option<Vec<u32>> {
        let errors = self.errors?;
        match self.oracle {
            OracleMode::Plaintext => Some(self.challenge.c.clone()),
            OracleMode::Honest => lattice::strip_mask(self.challenge, self.public, errors).ok(),
        }
    }
}

/// Picks the plaintext closest (in centered distance mod p) to `z`.
fn closer_to_m1(z: &[u32], m0: &[u32], m1: &[u32], p: u32) -> Option<bool> {
    let dist = |m: &[u32]| -> i64 {
        z.iter()
            .zip(m)
            .map(|(&a, &b)| centered(a as i64 - b as i64, p).abs())
            .sum()
    };
    let (d0, d1) = (dist(m0), dist(m1));
    (d0 != d1).then_some(d1 < d0)
}

pub trait Distinguisher {
    fn name(&self) -> &'static str;
    /// One-line description of what the distinguisher looks at.
    fn features(&self) -> &'static str;
    /// Guess `b`; `rng` is the adversary's private randomness for this trial.
    fn guess(&mut self, view: &TrialView<'_>, rng: &mut Stream) -> bool;
}

/// Fair coin (test hook).
pub struct CoinFlip;

impl Distinguisher for CoinFlip {
    fn name(&self) -> &'static str {
        "coin_flip"
    }

    fn features(&self) -> &'static str {
        "none"
    }

    fn guess(&mut self, _: &TrialView<'_>, rng: &mut Stream) -> bool {
        rng.random_bool(0.5)
    }
}

/// Correct with probability `accuracy`, using the revealed bit (test hook).
pub struct KnownAccuracy {
    pub accuracy: f64,
}

impl Distinguisher for KnownAccuracy {
    fn name(&self) -> &'static str {
        "known_accuracy"
    }

    fn features(&self) -> &'static str {
        "the revealed bit"
    }

    fn guess(&mut self, view: &TrialView<'_>, rng: &mut Stream) -> bool {
        let b = view.revealed_bit.expect("KnownAccuracy needs GameConfig::reveal_bit");
        if rng.random_bool(self.accuracy) {
            b
        } else {
            !b
        }
    }
}

/// Compares the histogram of the challenge residues with histograms of
/// Eve's own encryptions of `M_0` and `M_1`; picks the smaller chi-square.
pub struct MarginalChiSquare {
    pub samples: usize,
    pub bins: usize,
}

impl MarginalChiSquare {
    fn histogram(&self, values: &[u32], p: u32) -> Vec<f64> {
        let mut h = alloc::vec![0.0; self.bins];
        for &v in values {
            h[(v as usize * self.bins) / p as usize] += 1.0;
        }
        h
    }

    fn chi_square(observed: &[f64], reference: &[f64]) -> f64 {
        let n_obs: f64 = observed.iter().sum();
        let n_ref: f64 = reference.iter().sum();
        let bins = reference.len() as f64;
        // Add-half smoothing keeps empty reference bins finite.
        observed
            .iter()
            .zip(reference)
            .map(|(&o, &r)| {
                let e = n_obs * (r + 0.5) / (n_ref + 0.5 * bins);
                (o - e) * (o - e) / e
            })
            .sum()
    }
}

impl Distinguisher for MarginalChiSquare {
    fn name(&self) -> &'static str {
        "marginal_chisq"
    }

    fn features(&self) -> &'static str {
        "pooled histogram of ciphertext residues c mod p"
    }

    fn guess(&mut self, view: &TrialView<'_>, rng: &mut Stream) -> bool {
        let p = view.public.params.p;
        if let Some(z) = view.unmasked() {
            if let Some(g) = closer_to_m1(&z, view.m0, view.m1, p) {
                return g;
            }
        }
        let mut pool = |m: &[u32]| {
            let mut all = Vec::with_capacity(self.samples * m.len());
            for _ in 0..self.samples {
                all.extend(view.encrypt_c(m, rng));
            }
            self.histogram(&all, p)
        };
        let (h0, h1) = (pool(view.m0), pool(view.m1));
        let obs = self.histogram(&view.challenge.c, p);
        let (x0, x1) = (Self::chi_square(&obs, &h0), Self::chi_square(&obs, &h1));
        if x0 == x1 {
            rng.random_bool(0.5)
        } else {
            x1 < x0
        }
    }
}

/// Logistic regression trained per trial on Eve's own encryptions of `M_0`
/// and `M_1` under the trial's public key.
pub struct TrainedClassifier {
    pub samples: usize,
    pub epochs: usize,
}

impl TrainedClassifier {
    /// `c_i/p − ½` for every coordinate, then the centered differences
    /// `(c_{i+1} − c_i)/p` of neighbouring coordinates.
    fn featurize(c: &[u32], p: u32) -> Vec<f64> {
        let pf = p as f64;
        let mut f: Vec<f64> = c.iter().map(|&v| v as f64 / pf - 0.5).collect();
        f.extend(c.windows(2).map(|w| centered(w[1] as i64 - w[0] as i64, p) as f64 / pf));
        f
    }
}

impl Distinguisher for TrainedClassifier {
    fn name(&self) -> &'static str {
        "trained_classifier"
    }

    fn features(&self) -> &'static str {
        "logistic regression on c/p - 1/2 and centered neighbour differences (c[i+1]-c[i])/p"
    }

    fn guess(&mut self, view: &TrialView<'_>, rng: &mut Stream) -> bool {
        let p = view.public.params.p;
        if let Some(z) = view.unmasked() {
            if let Some(g) = closer_to_m1(&z, view.m0, view.m1, p) {
                return g;
            }
        }
        let mut rows = Vec::with_capacity(2 * self.samples);
        let mut labels = Vec::with_capacity(2 * self.samples);
        for _ in 0..self.samples {
            for (m, label) in [(view.m0, false), (view.m1, true)] {
                rows.push(Self::featurize(&view.encrypt_c(m, rng), p));
                labels.push(label);
            }
        }
        let model = Logistic::fit(&rows, &labels, self.epochs, 0.05);
        let s = model.score(&Self::featurize(&view.challenge.c, p));
        if s == 0.0 {
            rng.random_bool(0.5)
        } else {
            s > 0.0
        }
    }
}

/// `Âdv = 2·q̂ − 1` with a Wilson 95% interval mapped through the same
/// affine function.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageEstimate {
    pub distinguisher: &'static str,
    pub features: &'static str,
    pub trials: u64,
    pub correct: u64,
    pub advantage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl AdvantageEstimate {
    pub fn from_counts(distinguisher: &'static str, features: &'static str, correct: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(correct, trials, Z_95);
        AdvantageEstimate {
            distinguisher,
            features,
            trials,
            correct,
            advantage: 2.0 * correct as f64 / trials as f64 - 1.0,
            ci_low: 2.0 * lo - 1.0,
            ci_high: 2.0 * hi - 1.0,
        }
    }

    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

pub fn distinguisher_for(kind: DistinguisherKind, cfg: &GameConfig) -> Box<dyn Distinguisher> {
    match kind {
        DistinguisherKind::MarginalChiSquare => Box::new(MarginalChiSquare {
            samples: cfg.samples_per_hypothesis,
            bins: cfg.bins,
        }),
        DistinguisherKind::TrainedClassifier => Box::new(TrainedClassifier {
            samples: cfg.samples_per_hypothesis,
            epochs: cfg.classifier_epochs,
        }),
    }
}

pub fn run_ind_cpa_game(cfg: &GameConfig, kind: DistinguisherKind) -> Result<AdvantageEstimate> {
    run_ind_cpa_game_with(cfg, distinguisher_for(kind, cfg).as_mut())
}

/// Plays `cfg.trials` independent rounds. Trial `t` draws its keys, bit
/// and errors from the challenger stream `t` and gives the distinguisher
/// adversary stream `t`.
pub fn run_ind_cpa_game_with(cfg: &GameConfig, distinguisher: &mut dyn Distinguisher) -> Result<AdvantageEstimate> {
    cfg.validate()?;
    let (m0, m1) = cfg.plaintext_pair()?;
    let mut correct = 0u64;
    for t in 0..cfg.trials as u64 {
        let mut challenger = rng::stream(cfg.seed, Domain::Game, t);
        let key_seed: u64 = challenger.random();
        let lattice_seed: u64 = challenger.random();
        let error_seed: u64 = challenger.random();
        let b: bool = challenger.random_bool(0.5);
        let keys = keygen(&cfg.params, key_seed, lattice_seed)?;
        let errors = derive_errors(error_seed, t, &cfg.params);
        let m = if b { &m1 } else { &m0 };
        let challenge = match cfg.oracle {
            OracleMode::Honest => lattice::encrypt(m, &keys.public, &errors)?,
            OracleMode::Plaintext => Ciphertext {
                c: m.clone(),
                d: alloc::vec![0; cfg.params.n2],
                message_index: t,
            },
        };
        let view = TrialView {
            public: &keys.public,
            m0: &m0,
            m1: &m1,
            challenge: &challenge,
            errors: cfg.eve_knows_error_seed.then_some(&errors),
            revealed_bit: cfg.reveal_bit.then_some(b),
            oracle: cfg.oracle,
        };
        let mut adversary = rng::stream(cfg.seed, Domain::Adversary, t);
        if distinguisher.guess(&view, &mut adversary) == b {
            correct += 1;
        }
    }
    Ok(AdvantageEstimate::from_counts(
        distinguisher.name(),
        distinguisher.features(),
        correct,
        cfg.trials as u64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(trials: usize) -> GameConfig {
        GameConfig::new(LweParams::new(4093, 16, 16, 8.87, 8).unwrap(), trials, 11)
    }

    #[test]
    fn coin_flip_has_no_advantage() {
        let est = run_ind_cpa_game_with(&small(2000), &mut CoinFlip).unwrap();
        assert!(est.ci_contains(0.0), "{est:?}");
    }

    #[test]
    fn perfect_distinguisher() {
        let mut cfg = small(200);
        cfg.reveal_bit = true;
        let est = run_ind_cpa_game_with(&cfg, &mut KnownAccuracy { accuracy: 1.0 }).unwrap();
        assert_eq!(est.advantage, 1.0);
    }

    #[test]
    fn plaintext_oracle_is_caught() {
        let mut cfg = small(200);
        cfg.oracle = OracleMode::Plaintext;
        for kind in [DistinguisherKind::MarginalChiSquare, DistinguisherKind::TrainedClassifier] {
            let est = run_ind_cpa_game(&cfg, kind).unwrap();
            assert_eq!(est.advantage, 1.0, "{kind:?}");
        }
    }

    #[test]
    fn known_errors_break_the_game() {
        let mut cfg = small(200);
        cfg.eve_knows_error_seed = true;
        let est = run_ind_cpa_game(&cfg, DistinguisherKind::MarginalChiSquare).unwrap();
        assert_eq!(est.advantage, 1.0);
    }

    #[test]
    fn honest_game_small() {
        // Four standard errors at 400 trials.
        for kind in [DistinguisherKind::MarginalChiSquare, DistinguisherKind::TrainedClassifier] {
            let est = run_ind_cpa_game(&small(400), kind).unwrap();
            assert!(est.advantage.abs() < 0.2, "{est:?}");
        }
    }

    #[test]
    fn config_checks() {
        assert!(run_ind_cpa_game_with(&small(99), &mut CoinFlip).is_err());
        let mut cfg = small(100);
        cfg.plaintexts = Some((alloc::vec![0; 3], alloc::vec![0; 8]));
        assert!(run_ind_cpa_game_with(&cfg, &mut CoinFlip).is_err());
        assert!("oracle".parse::<DistinguisherKind>().is_err());
    }

    #[test]
    fn estimate_arithmetic() {
        let e = AdvantageEstimate::from_counts("x", "y", 750, 1000);
        assert!((e.advantage - 0.5).abs() < 1e-12);
        assert!(e.ci_contains(0.5) && !e.ci_contains(0.4));
    }
}
