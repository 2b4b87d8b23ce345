//! Run configuration (TOML). Every field has a default matching the
//! reference parameter set, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lwejscc_core::codec::{CodecKind, CodecSpec, Loss};
use lwejscc_core::dataset::{DatasetSpec, SyntheticKind};
use lwejscc_core::lattice::{LweParams, REFERENCE_N, REFERENCE_P, REFERENCE_SIGMA_S};
use lwejscc_core::modem::DEFAULT_SIGMA_L;
use lwejscc_core::quantization::{DEFAULT_LEVELS, SIGMA_Q_INIT};
use lwejscc_core::security::{AdversaryModel, AttackMetric};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lwe: LweSection,
    pub quantizer: QuantizerSection,
    pub modem: ModemSection,
    pub codec: CodecSection,
    pub dataset: DatasetSection,
    pub seeds: SeedSection,
    pub output: OutputSection,
    pub train: TrainSection,
    pub game: GameSection,
    pub attack: AttackSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LweSection {
    pub p: u32,
    pub n1: usize,
    pub n2: usize,
    pub sigma_s: f64,
    /// Plaintext length; defaults to the codec's latent length.
    pub k: Option<usize>,
}

impl Default for LweSection {
    fn default() -> Self {
        LweSection {
            p: REFERENCE_P,
            n1: REFERENCE_N,
            n2: REFERENCE_N,
            sigma_s: REFERENCE_SIGMA_S,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSection {
    pub levels: usize,
    pub sigma_q_init: f64,
}

impl Default for QuantizerSection {
    fn default() -> Self {
        QuantizerSection {
            levels: DEFAULT_LEVELS,
            sigma_q_init: SIGMA_Q_INIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModemSection {
    /// Average constellation power `P̄`.
    pub power: f64,
    pub sigma_l: f64,
    /// SNR grid in dB for `sweep` and `transmit`.
    pub snr_db: Vec<f64>,
}

impl Default for ModemSection {
    fn default() -> Self {
        ModemSection {
            power: 1.0,
            sigma_l: DEFAULT_SIGMA_L,
            snr_db: vec![0.0, 5.0, 10.0, 15.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    pub kind: String,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Latent length; identity codecs use `H·W·C`.
    pub k: Option<usize>,
    pub hidden: Vec<usize>,
    /// Defaults to `p/256`.
    pub latent_scale: Option<f64>,
    /// Trained parameters written by `train`.
    pub params: Option<PathBuf>,
}

impl Default for CodecSection {
    fn default() -> Self {
        CodecSection {
            kind: "identity".into(),
            height: 16,
            width: 16,
            channels: 1,
            k: None,
            hidden: vec![32],
            latent_scale: None,
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: String,
    pub count: usize,
    /// Image files to use instead of synthetic data.
    pub images: Vec<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            kind: "mixed".into(),
            count: 100,
            images: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    pub key: u64,
    pub lattice: u64,
    pub error: u64,
    pub channel: u64,
    pub data: u64,
    pub init: u64,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection {
            key: 1,
            lattice: 2,
            error: 3,
            channel: 4,
            data: 5,
            init: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub sweep_csv: PathBuf,
    pub indcpa_csv: PathBuf,
    pub attack_csv: PathBuf,
    pub train_csv: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            sweep_csv: "sweep.csv".into(),
            indcpa_csv: "indcpa.csv".into(),
            attack_csv: "attack.csv".into(),
            train_csv: "train.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub snr_db: f64,
    pub max_steps: u64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: String,
    /// Extra synthetic images held out for validation.
    pub validation: usize,
    pub patience: usize,
    pub decay_after: usize,
    pub decay_factor: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            snr_db: 10.0,
            max_steps: 5000,
            max_epochs: 1000,
            batch_size: 4,
            learning_rate: lwejscc_core::codec::DEFAULT_LEARNING_RATE,
            loss: "mse".into(),
            validation: 100,
            patience: 10,
            decay_after: 5,
            decay_factor: 0.8,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub trials: usize,
    /// Plaintext length for the game; the remaining LWE parameters come
    /// from `[lwe]`.
    pub k: usize,
    pub seed: u64,
    pub samples_per_hypothesis: usize,
    pub bins: usize,
    pub classifier_epochs: usize,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection {
            trials: 10_000,
            k: 16,
            seed: 7,
            samples_per_hypothesis: 32,
            bins: 16,
            classifier_epochs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub models: Vec<String>,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub epochs: usize,
    pub metric: String,
    /// Eve's SNR; absent means a noiseless tap.
    pub snr_e_db: Option<f64>,
    pub hidden: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            models: vec!["mean_predictor".into(), "linear".into(), "mlp".into()],
            train_pairs: 8000,
            test_pairs: 2000,
            epochs: 60,
            metric: "mse".into(),
            snr_e_db: None,
            hidden: 64,
            learning_rate: 1e-3,
            seed: 8,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.codec_spec()?;
        self.lwe_params()?;
        self.train_loss()?;
        self.attack_models()?;
        self.attack_metric()?;
        if self.dataset.images.is_empty() {
            self.dataset.kind.parse::<SyntheticKind>()?;
        }
        if self.modem.snr_db.iter().any(|s| s.is_nan()) {
            bail!("modem.snr_db contains NaN");
        }
        Ok(())
    }

    pub fn codec_spec(&self) -> Result<CodecSpec> {
        let c = &self.codec;
        let kind: CodecKind = c.kind.parse()?;
        let p = self.lwe.p;
        let mut spec = match kind {
            CodecKind::Identity => CodecSpec::identity(c.height, c.width, c.channels, p),
            CodecKind::Linear | CodecKind::Mlp => {
                let Some(k) = c.k else {
                    bail!("codec.k is required for trainable codecs");
                };
                if kind == CodecKind::Linear {
                    CodecSpec::linear(c.height, c.width, c.channels, k, p)
                } else {
                    CodecSpec::mlp(c.height, c.width, c.channels, k, c.hidden.clone(), p)
                }
            }
        };
        if let Some(k) = c.k {
            spec.k = k;
        }
        if let Some(ls) = c.latent_scale {
            spec.latent_scale = ls;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// LWE parameters with `k` taken from `[lwe]` or else the codec.
    pub fn lwe_params(&self) -> Result<LweParams> {
        let k = match self.lwe.k {
            Some(k) => k,
            None => self.codec_spec()?.k,
        };
        self.lwe_params_with_k(k)
    }

    pub fn lwe_params_with_k(&self, k: usize) -> Result<LweParams> {
        let l = &self.lwe;
        Ok(LweParams::new(l.p, l.n1, l.n2, l.sigma_s, k)?)
    }

    pub fn dataset_spec(&self, count: usize) -> Result<DatasetSpec> {
        Ok(DatasetSpec {
            kind: self.dataset.kind.parse()?,
            count,
            height: self.codec.height,
            width: self.codec.width,
            channels: self.codec.channels,
            seed: self.seeds.data,
        })
    }

    pub fn train_loss(&self) -> Result<Loss> {
        Ok(self.train.loss.parse()?)
    }

    pub fn attack_models(&self) -> Result<Vec<AdversaryModel>> {
        self.attack
            .models
            .iter()
            .map(|m| m.parse::<AdversaryModel>().map_err(Into::into))
            .collect()
    }

    pub fn attack_metric(&self) -> Result<AttackMetric> {
        Ok(self.attack.metric.parse()?)
    }
}
