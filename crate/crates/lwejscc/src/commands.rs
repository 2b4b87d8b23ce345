//! Subcommand implementations. Each returns a short human-readable summary
//! and writes its machine-readable output to the configured path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use lwejscc_core::codec::{fit, Codec, FitConfig, FitReport};
use lwejscc_core::dataset::synthesize_dataset;
use lwejscc_core::lattice::keygen as generate_keys;
use lwejscc_core::pipeline::{self, Link, SweepResult};
use lwejscc_core::security::{
    run_cpa_attack, run_ind_cpa_game, AttackConfig, AttackReport, DistinguisherKind, ErrorPolicy, GameConfig,
    OracleMode,
};
use lwejscc_core::{Image, KeyPair};

use crate::config::Config;
use crate::report::{self, GameRow};
use crate::{codecfile, keyfile, pnm};

/// Key pairs from files when given, otherwise generated from the
/// configured seeds.
pub fn load_keys(cfg: &Config, files: Option<(&Path, &Path)>) -> Result<KeyPair> {
    let params = cfg.lwe_params()?;
    let keys = match files {
        Some((public, secret)) => keyfile::read_keypair(public, secret)?,
        None => generate_keys(&params, cfg.seeds.key, cfg.seeds.lattice)?,
    };
    ensure!(
        keys.params() == &params,
        "key parameters {:?} do not match the configuration {:?}",
        keys.params(),
        params
    );
    Ok(keys)
}

pub fn load_codec(cfg: &Config) -> Result<Codec> {
    let spec = cfg.codec_spec()?;
    match &cfg.codec.params {
        Some(path) => {
            let codec = codecfile::read(path)?;
            let s = codec.spec();
            ensure!(
                (s.kind, s.height, s.width, s.channels, s.k) == (spec.kind, spec.height, spec.width, spec.channels, spec.k),
                "codec file {} does not match the [codec] section",
                path.display()
            );
            Ok(codec)
        }
        None => Ok(Codec::new(spec, cfg.seeds.init)?),
    }
}

/// Image files from `[dataset].images`, or `count` synthetic images.
pub fn load_images(cfg: &Config, count: usize) -> Result<Vec<Image>> {
    if cfg.dataset.images.is_empty() {
        Ok(synthesize_dataset(&cfg.dataset_spec(count)?)?)
    } else {
        cfg.dataset.images.iter().map(|p| pnm::read(p)).collect()
    }
}

pub fn build_link(cfg: &Config, keys: KeyPair, snr_db: f64) -> Result<Link> {
    let mut link = Link::new(
        keys,
        cfg.quantizer.levels,
        cfg.modem.power,
        snr_db,
        cfg.modem.sigma_l,
        cfg.seeds.error,
        cfg.seeds.channel,
    )?;
    link.quantizer.sigma_q = cfg.quantizer.sigma_q_init;
    Ok(link)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn keygen(params: &Path, public: &Path, secret: &Path) -> Result<String> {
    let cfg = Config::load(params)?;
    let keys = load_keys(&cfg, None)?;
    keyfile::write_keypair(&keys, public, secret)?;
    let p = keys.params();
    Ok(format!(
        "keys: p={} n1={} n2={} k={} -> {}, {}",
        p.p,
        p.n1,
        p.n2,
        p.k,
        public.display(),
        secret.display()
    ))
}

fn sweep_summary(result: &SweepResult) -> String {
    let mut s = String::new();
    for a in &result.aggregates {
        let _ = writeln!(
            s,
            "snr {:>6.2} dB  psnr {:>7.3} ± {:.3}  ssim {:.4}  crypto {:.1}  channel {:.1}  compound {:.1}",
            a.snr_db, a.psnr_mean, a.psnr_std, a.ssim_mean, a.crypto_std, a.channel_std, a.compound_std
        );
    }
    s
}

pub fn sweep(cfg: &Config, keys: Option<(&Path, &Path)>, out: Option<&Path>) -> Result<(SweepResult, String)> {
    ensure!(!cfg.modem.snr_db.is_empty(), "modem.snr_db is empty");
    let codec = load_codec(cfg)?;
    let link = build_link(cfg, load_keys(cfg, keys)?, cfg.modem.snr_db[0])?;
    let images = load_images(cfg, cfg.dataset.count)?;
    let result = pipeline::sweep(&images, &codec, &link, &cfg.modem.snr_db)?;
    let path = out.unwrap_or(&cfg.output.sweep_csv);
    write_text(path, &report::sweep_csv(&result)?)?;
    let summary = format!("{}rows -> {}", sweep_summary(&result), path.display());
    Ok((result, summary))
}

/// `input` is an image file or the word `synthetic`.
pub fn transmit(
    cfg: &Config,
    keys: Option<(&Path, &Path)>,
    input: &str,
    out: &Path,
    save: Option<&Path>,
) -> Result<String> {
    let codec = load_codec(cfg)?;
    let link = build_link(cfg, load_keys(cfg, keys)?, f64::INFINITY)?;
    let images = if input == "synthetic" {
        load_images(cfg, cfg.dataset.count)?
    } else {
        vec![pnm::read(Path::new(input))?]
    };
    let mut records = Vec::new();
    for &snr in &cfg.modem.snr_db {
        let at = link.with_snr(snr);
        for (i, x) in images.iter().enumerate() {
            let (x_hat, rec) = pipeline::transmit(x, &codec, &at, i, i as u64)?;
            if let Some(dir) = save {
                std::fs::create_dir_all(dir)?;
                let ext = if x.channels() == 1 { "pgm" } else { "ppm" };
                pnm::write(&x_hat, &dir.join(format!("img{i:04}_snr{snr}.{ext}")))?;
            }
            records.push(rec);
        }
    }
    let result = SweepResult {
        records,
        aggregates: Vec::new(),
    };
    write_text(out, &report::sweep_csv(&result)?)?;
    Ok(format!("{} transmissions -> {}", result.records.len(), out.display()))
}

/// Outcome of `indcpa`: report rows and whether the plaintext-oracle
/// sabotage control was detected.
pub struct GameOutcome {
    pub rows: Vec<GameRow>,
    pub sabotage_detected: bool,
    pub summary: String,
}

pub fn indcpa(cfg: &Config, out: Option<&Path>) -> Result<GameOutcome> {
    let g = &cfg.game;
    let mut base = GameConfig::new(cfg.lwe_params_with_k(g.k)?, g.trials, g.seed);
    base.levels = cfg.quantizer.levels;
    base.samples_per_hypothesis = g.samples_per_hypothesis;
    base.bins = g.bins;
    base.classifier_epochs = g.classifier_epochs;

    let mut rows = Vec::new();
    for (variant, oracle, knows) in [
        ("honest", OracleMode::Honest, false),
        ("eve_knows_error_seed", OracleMode::Honest, true),
        ("sabotage_plaintext_oracle", OracleMode::Plaintext, false),
    ] {
        for kind in [DistinguisherKind::MarginalChiSquare, DistinguisherKind::TrainedClassifier] {
            let mut gc = base.clone();
            gc.oracle = oracle;
            gc.eve_knows_error_seed = knows;
            // The sabotage control needs few trials to be conclusive.
            if oracle == OracleMode::Plaintext {
                gc.trials = gc.trials.min(1000);
            }
            let estimate = run_ind_cpa_game(&gc, kind)?;
            rows.push(GameRow {
                variant: variant.into(),
                oracle: match oracle {
                    OracleMode::Honest => "honest",
                    OracleMode::Plaintext => "plaintext",
                },
                eve_knows_error_seed: knows,
                estimate,
            });
        }
    }
    let sabotage_detected = rows
        .iter()
        .filter(|r| r.oracle == "plaintext")
        .all(|r| r.estimate.ci_low > 0.5);
    let path = out.unwrap_or(&cfg.output.indcpa_csv);
    write_text(path, &report::indcpa_csv(&rows)?)?;

    let mut summary = String::new();
    for r in &rows {
        let e = &r.estimate;
        let _ = writeln!(
            summary,
            "{:<26} {:<19} adv {:+.4}  95% CI [{:+.4}, {:+.4}]  trials {}",
            r.variant, e.distinguisher, e.advantage, e.ci_low, e.ci_high, e.trials
        );
    }
    let _ = writeln!(summary, "features:");
    for kind in [DistinguisherKind::MarginalChiSquare, DistinguisherKind::TrainedClassifier] {
        if let Some(r) = rows.iter().find(|r| r.estimate.distinguisher == kind.as_str()) {
            let _ = writeln!(summary, "  {}: {}", kind.as_str(), r.estimate.features);
        }
    }
    let _ = writeln!(
        summary,
        "note: weak distinguishers failing is necessary, not sufficient, evidence of security"
    );
    let _ = write!(
        summary,
        "sabotage control {} -> {}",
        if sabotage_detected { "detected" } else { "NOT detected" },
        path.display()
    );
    Ok(GameOutcome {
        rows,
        sabotage_detected,
        summary,
    })
}

pub struct AttackOutcome {
    pub reports: Vec<AttackReport>,
    pub sabotage_detected: bool,
    pub summary: String,
}

pub fn attack(cfg: &Config, out: Option<&Path>) -> Result<AttackOutcome> {
    let a = &cfg.attack;
    let codec = load_codec(cfg)?;
    let keys = load_keys(cfg, None)?;
    let link = build_link(cfg, keys, f64::INFINITY)?;
    let images = load_images(cfg, a.train_pairs + a.test_pairs)?;
    let metric = cfg.attack_metric()?;
    let mut reports = Vec::new();
    let mut run = |model, policy| -> Result<()> {
        let mut ac = AttackConfig::new(model, a.train_pairs, a.test_pairs);
        ac.epochs = a.epochs;
        ac.metric = metric;
        ac.error_policy = policy;
        ac.snr_e_db = a.snr_e_db;
        ac.power = cfg.modem.power;
        ac.hidden = a.hidden;
        ac.learning_rate = a.learning_rate;
        ac.seed = a.seed;
        // Only the public half of the key pair reaches the adversary.
        reports.push(run_cpa_attack(
            &ac,
            &codec,
            &link.quantizer,
            &link.keys.public,
            cfg.seeds.error,
            &images,
        )?);
        Ok(())
    };
    for model in cfg.attack_models()? {
        run(model, ErrorPolicy::FreshPerMessage)?;
    }
    run(lwejscc_core::security::AdversaryModel::Linear, ErrorPolicy::Reused)?;
    let sabotage = reports.last().expect("sabotage run");
    let sabotage_detected = sabotage.mse_ratio() < 0.5;
    let path = out.unwrap_or(&cfg.output.attack_csv);
    write_text(path, &report::attack_csv(&reports)?)?;

    let mut summary = String::new();
    for r in &reports {
        let _ = writeln!(
            summary,
            "{:<15} errors {:<6} mse {:>9.2} (baseline {:>9.2}, ratio {:.4})  psnr {:.2} dB vs {:.2} dB",
            r.model.as_str(),
            report::policy_name(r.error_policy),
            r.mse,
            r.baseline_mse,
            r.mse_ratio(),
            r.psnr,
            r.baseline_psnr
        );
    }
    let _ = write!(
        summary,
        "sabotage control {} -> {}",
        if sabotage_detected { "detected" } else { "NOT detected" },
        path.display()
    );
    Ok(AttackOutcome {
        reports,
        sabotage_detected,
        summary,
    })
}

pub fn train(cfg: &Config, out: &Path, log: Option<&Path>) -> Result<(Codec, FitReport, String)> {
    let t = &cfg.train;
    let codec = load_codec(cfg)?;
    if !codec.is_trainable() {
        bail!("codec kind `{}` has no parameters to train", cfg.codec.kind);
    }
    let link = build_link(cfg, load_keys(cfg, None)?, t.snr_db)?;
    let all = load_images(cfg, cfg.dataset.count + t.validation)?;
    ensure!(
        all.len() > t.validation,
        "need more than {} images to hold out a validation set",
        t.validation
    );
    let (train_set, validation) = all.split_at(all.len() - t.validation.max(1));
    let fit_cfg = FitConfig {
        batch_size: t.batch_size,
        max_epochs: t.max_epochs,
        max_steps: t.max_steps,
        learning_rate: t.learning_rate,
        loss: cfg.train_loss()?,
        patience: t.patience,
        decay_after: t.decay_after,
        decay_factor: t.decay_factor,
        shuffle_seed: t.shuffle_seed,
        sigma_q_init: cfg.quantizer.sigma_q_init,
    };
    let (codec, rep) = fit(codec, train_set, validation, &link, &fit_cfg)?;
    codecfile::write(&codec, out)?;
    let log_path: PathBuf = log.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.train_csv.clone());
    write_text(&log_path, &report::train_csv(&rep)?)?;
    let summary = format!(
        "steps {}  validation loss {:.3} -> {:.3} ({:.3}x)  codec -> {}  log -> {}",
        rep.steps,
        rep.initial_validation,
        rep.best_validation,
        rep.best_validation / rep.initial_validation,
        out.display(),
        log_path.display()
    );
    Ok((codec, rep, summary))
}
