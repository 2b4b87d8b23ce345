//! Security harness: the IND-CPA game with pluggable distinguishers and a
//! chosen-plaintext attack in which an eavesdropper learns to invert
//! ciphertexts.
//!
//! Weak adversaries failing is necessary, not sufficient, evidence of
//! security. The sabotage controls (a plaintext-leaking oracle, reused
//! error triples) exist to show the harness does detect a broken setup.

pub mod attack;
pub mod game;
mod learn;

pub use attack::{
    eve_channel_observe, run_cpa_attack, AdversaryModel, AttackConfig, AttackMetric, AttackReport, ErrorPolicy,
};
pub use game::{
    run_ind_cpa_game, run_ind_cpa_game_with, AdvantageEstimate, CoinFlip, Distinguisher, DistinguisherKind,
    GameConfig, KnownAccuracy, MarginalChiSquare, OracleMode, TrainedClassifier, TrialView,
};
